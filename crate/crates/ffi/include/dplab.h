#ifndef DPLAB_H
#define DPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_ARGUMENT = 2,
  DP_STATUS_INVALID_PARAMS = 3,
  DP_STATUS_INVALID_GRID = 4,
  DP_STATUS_GRID_TOO_SHORT = 5,
  DP_STATUS_BUFFER_TOO_SMALL = 6,
  DP_STATUS_NEAR_SINGULAR = 7,
  DP_STATUS_NON_POSITIVE_MOMENTUM = 8,
  DP_STATUS_NUMERICAL = 9,
  DP_STATUS_NO_ROOTS = 10,
  DP_STATUS_PANIC = 99,
} DpStatus;

/**
 * Opaque dense linearized operator about a wave.
 */
typedef struct DpOperator DpOperator;

/**
 * Opaque solitary wave on a periodic grid.
 */
typedef struct DpWave DpWave;

typedef struct DpOrbital {
  double d2;
  double dinf;
  double x0;
} DpOrbital;

typedef struct DpSpectrum {
  double lambda_star;
  double zero_eig;
  double zero_cosine;
  double positive_gap;
  double continuum_edge;
  size_t negative_count;
  size_t zero_count;
  /**
   * 1 when the spectrum has the expected shape
   */
  int32_t classified;
} DpSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dp_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dp_last_error(char *buf, size_t len);

/**
 * Build the solitary wave of speed `c` on `[−L, L)` with `n` points.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum DpStatus dp_wave_new(double c, double k, size_t n, double half_length, struct DpWave **out);

/**
 * # Safety
 * `wave` must come from [`dp_wave_new`] and not be used afterwards.
 */
void dp_wave_free(struct DpWave *wave);

/**
 * # Safety
 * `wave` must be a live handle.
 */
size_t dp_wave_len(const struct DpWave *wave);

/**
 * # Safety
 * `wave` must be a live handle and `out` writable.
 */
enum DpStatus dp_wave_max_height(const struct DpWave *wave, double *out);

/**
 * Residual of the travelling-wave ODE on the grid.
 *
 * # Safety
 * `wave` must be a live handle and `out` writable.
 */
enum DpStatus dp_wave_residual(const struct DpWave *wave, double *out);

/**
 * Copy grid points (`which = 0`), `φ` (1) or `φ_x` (2) into `out`.
 *
 * # Safety
 * `wave` must be a live handle and `out` valid for `len` doubles.
 */
enum DpStatus dp_wave_copy(const struct DpWave *wave, int32_t which, double *out, size_t len);

/**
 * `S(u)` and `H(u)` of samples on `[−L, L)`.
 *
 * # Safety
 * `values` must hold `n` doubles; `s_out`, `h_out` must be writable.
 */
enum DpStatus dp_functionals(const double *values,
                             size_t n,
                             double half_length,
                             double k,
                             double *s_out,
                             double *h_out);

/**
 * Evolve samples in place from `t = 0` to `t_end` with RK4 step `dt`.
 *
 * # Safety
 * `values` must hold `n` writable doubles.
 */
enum DpStatus dp_evolve(double *values,
                        size_t n,
                        double half_length,
                        double k,
                        double dt,
                        double t_end);

/**
 * Orbital distance of samples (on the wave's grid) from the wave's orbit.
 *
 * # Safety
 * `wave` must be a live handle, `values` must hold `n` doubles and `out`
 * must be writable.
 */
enum DpStatus dp_orbital_distance(const struct DpWave *wave,
                                  const double *values,
                                  size_t n,
                                  struct DpOrbital *out);

/**
 * Roots `r1 < r2` of the stability certificate; [`DpStatus::NoRoots`] when
 * the polynomial never changes sign.
 *
 * # Safety
 * `r1`, `r2` must be writable.
 */
enum DpStatus dp_certificate(double alpha,
                             double beta,
                             double gamma,
                             double qbar,
                             double *r1,
                             double *r2);

/**
 * Assemble the dense linearized operator about `wave`.
 *
 * # Safety
 * `wave` must be a live handle and `out` writable.
 */
enum DpStatus dp_operator_new(const struct DpWave *wave, struct DpOperator **out);

/**
 * # Safety
 * `op` must come from [`dp_operator_new`] and not be used afterwards.
 */
void dp_operator_free(struct DpOperator *op);

/**
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum DpStatus dp_operator_spectrum(const struct DpOperator *op, struct DpSpectrum *out);

/**
 * All eigenvalues in ascending order.
 *
 * # Safety
 * `op` must be a live handle and `out` valid for `len` doubles.
 */
enum DpStatus dp_operator_eigenvalues(const struct DpOperator *op, double *out, size_t len);

/**
 * Constrained coercivity constant.
 *
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum DpStatus dp_operator_alpha(const struct DpOperator *op, double *out);

/**
 * `g(λ) = ((L_c − λ)⁻¹ψ̃, ψ̃)`.
 *
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum DpStatus dp_operator_resolvent(const struct DpOperator *op, double lambda, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPLAB_H */
