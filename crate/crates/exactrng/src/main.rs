fn main() {
    std::process::exit(exactrng::cli::main());
}
