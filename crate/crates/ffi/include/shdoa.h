#ifndef SHDOA_H
#define SHDOA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum ShdoaStatus {
  SHDOA_STATUS_OK = 0,
  SHDOA_STATUS_NULL_POINTER = 1,
  SHDOA_STATUS_INVALID_ARGUMENT = 2,
  SHDOA_STATUS_BUFFER_TOO_SMALL = 3,
  SHDOA_STATUS_DIMENSION_MISMATCH = 4,
  SHDOA_STATUS_RANK_DEFICIENT = 5,
  SHDOA_STATUS_SINGULAR = 6,
  SHDOA_STATUS_CONDITIONING = 7,
  SHDOA_STATUS_DOMAIN = 8,
  SHDOA_STATUS_INTERNAL = 9,
} ShdoaStatus;

/**
 * Source waveform family for [`shdoa_synth_direct`].
 */
typedef enum ShdoaSignalKind {
  SHDOA_SIGNAL_KIND_GAUSSIAN = 0,
  SHDOA_SIGNAL_KIND_CONSTANT = 1,
  SHDOA_SIGNAL_KIND_SINUSOID_BANK = 2,
} ShdoaSignalKind;

/**
 * Estimator selector for [`shdoa_estimate`].
 */
typedef enum ShdoaEstimator {
  SHDOA_ESTIMATOR_EM = 0,
  SHDOA_ESTIMATOR_UNIFORM_ML = 1,
  SHDOA_ESTIMATOR_MUSIC = 2,
} ShdoaEstimator;

/**
 * Output of [`shdoa_estimate`].
 */
typedef struct ShdoaEstimate ShdoaEstimate;

/**
 * HOA observation `b(t)`, `P × Ns`.
 */
typedef struct ShdoaHoa ShdoaHoa;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *shdoa_last_error_message(void);

/**
 * Real SH vector `y(θ, φ)` of order `order` into `out[0..(order+1)²]`.
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum ShdoaStatus shdoa_sph_harm_vector(size_t order,
                                       double theta,
                                       double phi,
                                       double *out,
                                       size_t out_len);

/**
 * Wraps caller-provided frames (`(order+1)² × num_snapshots`, column-major).
 *
 * # Safety
 * `frames` must point to `dim * num_snapshots` doubles; `out` to a writable
 * handle slot.
 */
enum ShdoaStatus shdoa_hoa_from_frames(size_t order,
                                       const double *frames,
                                       size_t num_snapshots,
                                       struct ShdoaHoa **out);

/**
 * Direct SH-domain synthesis `b = Y(Ψ)ᵀ s + z`.
 *
 * `noise` holds either one variance (uniform) or `(order+1)²` variances
 * (diagonal).
 *
 * # Safety
 * `doas` must point to `2 * num_sources` doubles, `noise` to `noise_len`
 * doubles, `out` to a writable handle slot.
 */
enum ShdoaStatus shdoa_synth_direct(size_t order,
                                    const double *doas,
                                    size_t num_sources,
                                    size_t num_snapshots,
                                    enum ShdoaSignalKind signal,
                                    const double *noise,
                                    size_t noise_len,
                                    uint64_t seed,
                                    struct ShdoaHoa **out);

/**
 * Dimension `P` and snapshot count of an observation.
 *
 * # Safety
 * `hoa` must be a live handle; `dim` and `num_snapshots` writable.
 */
enum ShdoaStatus shdoa_hoa_shape(const struct ShdoaHoa *hoa, size_t *dim, size_t *num_snapshots);

/**
 * Copies the frames, column-major, into `out`.
 *
 * # Safety
 * `hoa` must be a live handle; `out` must point to `out_len` doubles.
 */
enum ShdoaStatus shdoa_hoa_frames(const struct ShdoaHoa *hoa, double *out, size_t out_len);

/**
 * # Safety
 * `hoa` must be null or a handle not yet freed.
 */
void shdoa_hoa_free(struct ShdoaHoa *hoa);

/**
 * Runs one estimator with default settings for `num_sources` sources.
 *
 * # Safety
 * `hoa` must be a live handle; `out` a writable handle slot.
 */
enum ShdoaStatus shdoa_estimate(const struct ShdoaHoa *hoa,
                                enum ShdoaEstimator estimator,
                                size_t num_sources,
                                struct ShdoaEstimate **out);

/**
 * Number of estimated sources.
 *
 * # Safety
 * `est` must be a live handle; `out` writable.
 */
enum ShdoaStatus shdoa_estimate_num_sources(const struct ShdoaEstimate *est, size_t *out);

/**
 * Estimated DOAs as `(θ, φ)` pairs.
 *
 * # Safety
 * `est` must be a live handle; `out` must point to `out_len` doubles.
 */
enum ShdoaStatus shdoa_estimate_doas(const struct ShdoaEstimate *est, double *out, size_t out_len);

/**
 * Iteration count and convergence flag.
 *
 * # Safety
 * `est` must be a live handle; `iterations` and `converged` writable.
 */
enum ShdoaStatus shdoa_estimate_status(const struct ShdoaEstimate *est,
                                       size_t *iterations,
                                       bool *converged);

/**
 * Copies the objective trace. `written` receives its full length, so a call
 * with `out_len = 0` queries the size.
 *
 * # Safety
 * `est` must be a live handle; `out` must point to `out_len` doubles and
 * `written` be writable.
 */
enum ShdoaStatus shdoa_estimate_objective_trace(const struct ShdoaEstimate *est,
                                                double *out,
                                                size_t out_len,
                                                size_t *written);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void shdoa_estimate_free(struct ShdoaEstimate *est);

/**
 * Deterministic CRB in rad² per source and axis.
 *
 * `signals` is `num_sources × num_snapshots`, column-major; `noise` holds
 * one variance or `(order+1)²` variances.
 *
 * # Safety
 * Pointers must cover the stated lengths; `theta_bounds` and `phi_bounds`
 * must point to `num_sources` writable doubles each.
 */
enum ShdoaStatus shdoa_crb(size_t order,
                           const double *doas,
                           size_t num_sources,
                           const double *signals,
                           size_t num_snapshots,
                           const double *noise,
                           size_t noise_len,
                           double *theta_bounds,
                           double *phi_bounds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHDOA_H */
