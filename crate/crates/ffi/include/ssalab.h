#ifndef SSALAB_H
#define SSALAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsaStatus {
  SSA_STATUS_OK = 0,
  SSA_STATUS_NULL_POINTER = 1,
  SSA_STATUS_INVALID_ARGUMENT = 2,
  SSA_STATUS_INVALID_STATE = 3,
  SSA_STATUS_PARSE = 4,
  SSA_STATUS_NO_CONVERGENCE = 5,
  SSA_STATUS_SAMPLER_FAILURE = 6,
  SSA_STATUS_BUFFER_TOO_SMALL = 7,
  SSA_STATUS_PANIC = 8,
} SsaStatus;

/**
 * Opaque tripartite density matrix.
 */
typedef struct SsaDensity SsaDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ssa_last_error_message(void);

/**
 * Parses `{"dims":[L,M,N],"entries":[[re,im],...]}` (row-major) into a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SsaStatus ssa_density_from_json(const char *json, struct SsaDensity **out);

/**
 * Generates a state from a generator spec such as
 * `{"dims":[2,2,2],"kind":{"type":"ginibre_full"},"seed":7}`.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SsaStatus ssa_density_generate(const char *spec_json, struct SsaDensity **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `rho` must come from this library and not be used afterwards.
 */
void ssa_density_free(struct SsaDensity *rho);

/**
 * Writes `L`, `M`, `N` to `out[0..3]`.
 *
 * # Safety
 * `rho` must be a live handle and `out` must hold three values.
 */
enum SsaStatus ssa_density_dims(const struct SsaDensity *rho, size_t *out);

/**
 * Ascending spectrum of the marginal on the parties in `keep_mask`
 * (bit 0 = A, bit 1 = B, bit 2 = C). `*out_len` receives the length; if
 * `capacity` is smaller nothing is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `rho` must be a live handle, `out` must hold `capacity` doubles, and
 * `out_len` must be writable.
 */
enum SsaStatus ssa_density_spectrum(const struct SsaDensity *rho,
                                    uint8_t keep_mask,
                                    double *out,
                                    size_t capacity,
                                    size_t *out_len);

/**
 * `S(AB) + S(BC) − S(B) − S(ABC)` in nats.
 *
 * # Safety
 * `rho` must be a live handle and `out` writable.
 */
enum SsaStatus ssa_density_ssa_gap(const struct SsaDensity *rho, double *out);

/**
 * Full condition report (majorization margins, zero counts, entropy gaps) as JSON.
 *
 * # Safety
 * `rho` must be a live handle and `out` writable; free the result with `ssa_string_free`.
 */
enum SsaStatus ssa_density_report_json(const struct SsaDensity *rho,
                                       double rank_threshold,
                                       char **out);

/**
 * Runs the multi-start minimizer for a request such as
 * `{"dims":[2,2,2],"pattern":{"abc":0,"ab":0,"bc":0,"b":0},"restarts":8,"seed":1}`
 * and returns the result as JSON.
 *
 * # Safety
 * `request_json` must be a NUL-terminated string and `out` writable; free
 * the result with `ssa_string_free`.
 */
enum SsaStatus ssa_minimize_json(const char *request_json, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ssa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSALAB_H */
