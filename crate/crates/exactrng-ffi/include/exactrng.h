/* C interface to exactrng. Generated by cbindgen; do not edit. */

#ifndef EXACTRNG_H
#define EXACTRNG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call status. Zero is success; everything else leaves a message in
 * `exactrng_last_error`.
 */
typedef enum ExactrngStatus {
  ExactrngStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  ExactrngStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ExactrngStatus_InvalidUtf8 = 2,
  /**
   * The model config failed to parse or validate.
   */
  ExactrngStatus_BadConfig = 3,
  /**
   * The models are fine but the request cannot be served for them.
   */
  ExactrngStatus_BadRequest = 4,
  /**
   * The computation exceeded a budget or lost a certificate.
   */
  ExactrngStatus_ComputeError = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  ExactrngStatus_Panic = 6,
} ExactrngStatus;

/**
 * Opaque process model handle.
 */
typedef struct ExactrngProcess ExactrngProcess;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *exactrng_version(void);

/**
 * Message for the most recent failure on this thread; valid until the next
 * failing call on the same thread. Do not free.
 */
const char *exactrng_last_error(void);

/**
 * Frees a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have come from this library and not been freed before.
 */
void exactrng_string_free(char *s);

/**
 * Parses and validates a process model from its JSON config. On success
 * writes a handle to `out`; release it with `exactrng_process_free`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum ExactrngStatus exactrng_process_from_json(const char *json, struct ExactrngProcess **out);

/**
 * Releases a process handle. Null is a no-op.
 *
 * # Safety
 * `p` must have come from `exactrng_process_from_json` and not been freed
 * before.
 */
void exactrng_process_free(struct ExactrngProcess *p);

/**
 * Generates one length-`n` target word from a seeded coin realization.
 * The result JSON carries the 1-based word `y`, the number of coin symbols
 * consumed `t`, and the random bits drawn.
 *
 * # Safety
 * `coin` and `target` must be live process handles and `out_json` a valid
 * pointer.
 */
enum ExactrngStatus exactrng_generate(const struct ExactrngProcess *coin,
                                      const struct ExactrngProcess *target,
                                      uint32_t n,
                                      uint64_t seed,
                                      char **out_json);

/**
 * Exact stopping-time analysis: overflow probabilities Pr(T > m) for
 * m = 0..=m_max and a certified enclosure of E[T]. Exact values are
 * rational strings; `expected_t.upper` is null when no geometric tail
 * certificate exists.
 *
 * # Safety
 * `coin` and `target` must be live process handles and `out_json` a valid
 * pointer.
 */
enum ExactrngStatus exactrng_analyze(const struct ExactrngProcess *coin,
                                     const struct ExactrngProcess *target,
                                     uint32_t n,
                                     uint32_t m_max,
                                     char **out_json);

/**
 * Asymptotic per-symbol rate figures for the pair, from the two entropy
 * spectra. Values carry certified error bounds.
 *
 * # Safety
 * `coin` and `target` must be live process handles and `out_json` a valid
 * pointer.
 */
enum ExactrngStatus exactrng_rates(const struct ExactrngProcess *coin,
                                   const struct ExactrngProcess *target,
                                   char **out_json);

/**
 * Seeded Monte Carlo run: `trials` generations of a length-`n` word, with
 * the stopping-time histogram, mean, and empirical word law in the result.
 * Deterministic for a fixed config.
 *
 * # Safety
 * `coin` and `target` must be live process handles and `out_json` a valid
 * pointer.
 */
enum ExactrngStatus exactrng_simulate(const struct ExactrngProcess *coin,
                                      const struct ExactrngProcess *target,
                                      uint32_t n,
                                      uint64_t trials,
                                      uint64_t seed,
                                      char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EXACTRNG_H */
