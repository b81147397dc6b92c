#ifndef UDN_COVERAGE_H
#define UDN_COVERAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define UDN_ASSOCIATION_CLOSEST 0

#define UDN_ASSOCIATION_STRONGEST 1

#define UDN_LOS_NONE 0

/**
 * `los_a` is the constant probability.
 */
#define UDN_LOS_CONSTANT 1

/**
 * `los_a`, `los_b` are the UMi distances `d1`, `d2`.
 */
#define UDN_LOS_UMI 2

/**
 * `los_a` is the step distance `D`.
 */
#define UDN_LOS_STEP 3

/**
 * General LOS/NLOS coverage.
 */
#define UDN_METHOD_EXACT 0

/**
 * Coverage with every link NLOS.
 */
#define UDN_METHOD_NLOS 1

/**
 * Step-model coverage (step LOS only).
 */
#define UDN_METHOD_STEP 2

/**
 * Derivative-free upper bound (step LOS only).
 */
#define UDN_METHOD_UPPER_BOUND 3

#define UDN_METHOD_LOW_DENSITY_LIMIT 4

#define UDN_FLAG_EXCEEDS_ONE 1

#define UDN_FLAG_UPPER_BOUND_UNCLAMPED 2

#define UDN_FLAG_CANCELLATION_LOSS 4

typedef enum UdnStatus {
  UDN_STATUS_OK = 0,
  UDN_STATUS_INVALID_PARAMETER = 1,
  UDN_STATUS_NON_CONVERGENCE = 2,
  UDN_STATUS_DIVERGENT_TAIL = 3,
  UDN_STATUS_ORDER_TOO_HIGH = 4,
  UDN_STATUS_EMPTY_REALIZATION = 5,
  UDN_STATUS_UNSUPPORTED = 6,
  UDN_STATUS_NULL_POINTER = 7,
  UDN_STATUS_PANIC = 8,
} UdnStatus;

/**
 * Opaque scenario handle.
 */
typedef struct UdnScenario UdnScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a scenario. `theta_db` is the threshold in dB, `sigma2` the noise
 * power (0 for SIR); `m` is the Nakagami shape of LOS links (1 = Rayleigh).
 * `transitions` holds `n_exponents − 1` increasing distances.
 *
 * # Safety
 * `exponents` and `transitions` must point to the stated number of
 * doubles; `out` must be a valid pointer.
 */
enum UdnStatus udn_scenario_new(double lambda,
                                double sigma2,
                                uint32_t association,
                                double theta_db,
                                const double *exponents,
                                size_t n_exponents,
                                const double *transitions,
                                size_t n_transitions,
                                uint32_t los_kind,
                                double los_a,
                                double los_b,
                                uint32_t m,
                                struct UdnScenario **out);

/**
 * Releases a scenario; null is ignored.
 *
 * # Safety
 * `scenario` must come from [`udn_scenario_new`] and not be used afterwards.
 */
void udn_scenario_free(struct UdnScenario *scenario);

/**
 * Interference Laplace transform at `s` for serving distance `r`.
 * `los != 0` uses the LOS/NLOS interferer mix, otherwise all-NLOS.
 *
 * # Safety
 * `scenario` must be a live handle; `out` a valid pointer.
 */
enum UdnStatus udn_laplace(const struct UdnScenario *scenario,
                           int32_t los,
                           double s,
                           double r,
                           double *out);

/**
 * Analytic coverage by `method` (one of `UDN_METHOD_*`). `err` and `flags`
 * may be null.
 *
 * # Safety
 * `scenario` must be a live handle; `pcov` a valid pointer.
 */
enum UdnStatus udn_coverage(const struct UdnScenario *scenario,
                            uint32_t method,
                            int32_t include_noise,
                            double *pcov,
                            double *err,
                            uint32_t *flags);

/**
 * Monte Carlo coverage estimate with the automatic window. `stderr_out`
 * may be null.
 *
 * # Safety
 * `scenario` must be a live handle; `pcov` a valid pointer.
 */
enum UdnStatus udn_montecarlo(const struct UdnScenario *scenario,
                              uint64_t n_realizations,
                              uint64_t seed,
                              double *pcov,
                              double *stderr_out);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *udn_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UDN_COVERAGE_H */
