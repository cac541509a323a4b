#ifndef CUBE_WITNESS_H
#define CUBE_WITNESS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a library call. Values 1 to 4 match the CLI exit codes.
 */
typedef enum cw_status {
  CW_STATUS_OK = 0,
  /**
   * The report was produced but at least one of its checks failed.
   */
  CW_STATUS_CHECK_FAILED = 1,
  /**
   * Argument outside the mathematical domain, or malformed input.
   */
  CW_STATUS_DOMAIN = 2,
  CW_STATUS_INCONSISTENCY = 3,
  /**
   * A budget ran out or a quadrature did not converge.
   */
  CW_STATUS_BUDGET = 4,
  CW_STATUS_NULL_ARGUMENT = 10,
  CW_STATUS_INVALID_UTF8 = 11,
  CW_STATUS_BUFFER_TOO_SMALL = 12,
  CW_STATUS_PANIC = 13,
} cw_status;

/**
 * Exact witness for one (n, m); opaque to C.
 */
typedef struct cw_witness cw_witness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cw_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void cw_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cw_version(void);

/**
 * Builds the normalized witness for odd `n` and degree `m`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum cw_status cw_witness_new(size_t n, size_t m, struct cw_witness **out);

/**
 * Releases a witness handle. Null is ignored.
 *
 * # Safety
 * `w` must come from [`cw_witness_new`] and must not be used afterwards.
 */
void cw_witness_free(struct cw_witness *w);

/**
 * Dimension n of the witness, or 0 for a null handle.
 *
 * # Safety
 * `w` must be null or a live handle.
 */
size_t cw_witness_dimension(const struct cw_witness *w);

/**
 * Writes psi at Hamming weights 0..=n into `out`, which must hold n + 1
 * values.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum cw_status cw_witness_profile(const struct cw_witness *w, double *out, size_t len);

/**
 * Sup norm of the unnormalized witness.
 *
 * # Safety
 * `out` must be a valid pointer to one double.
 */
enum cw_status cw_witness_sup_norm(const struct cw_witness *w, double *out);

/**
 * Correlation of the witness with majority smoothed at noise rate `rho`
 * (a decimal or p/q string). Writes the value as a double and, when
 * `out_exact` is not null, as an exact rational string to free with
 * [`cw_string_free`].
 *
 * # Safety
 * `rho` must be a NUL-terminated string; `out` a valid pointer;
 * `out_exact` null or a valid pointer.
 */
enum cw_status cw_witness_kappa(const struct cw_witness *w,
                                const char *rho,
                                double *out,
                                char **out_exact);

/**
 * Correlation between the planted laws of directions `a` and `b`, given as
 * bit masks (bit i set means coordinate i is -1).
 *
 * # Safety
 * `out` must be a valid pointer to one double.
 */
enum cw_status cw_pairwise_chi(const struct cw_witness *w, uint64_t a, uint64_t b, double *out);

/**
 * Exact optimum of min over symmetric degree-m p of ||T_rho Maj_n - p||_1.
 *
 * # Safety
 * `rho` must be a NUL-terminated string; `out` a valid pointer.
 */
enum cw_status cw_l1_distance(size_t n, size_t m, const char *rho, double *out);

/**
 * Runs one CLI command given its arguments (without the program name,
 * e.g. {"witness", "--n", "11", "--m", "2"}) and returns the JSON report
 * through `out_report`. Returns [`CwStatus::CheckFailed`] with a report
 * when a check fails. Sweeps and the output flag are not available here.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings; `out_report` must be a
 * valid pointer.
 */
enum cw_status cw_run(int argc, const char *const *argv, char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUBE_WITNESS_H */
