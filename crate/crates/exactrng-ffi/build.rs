use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.include_guard = Some("EXACTRNG_H".into());
    config.cpp_compat = true;
    config.header = Some("/* C interface to exactrng. Generated by cbindgen; do not edit. */".into());
    config.documentation = true;
    config.enumeration.prefix_with_name = true;

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write_to_file(crate_dir.join("include/exactrng.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
}
