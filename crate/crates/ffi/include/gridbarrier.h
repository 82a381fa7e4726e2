/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GRIDBARRIER_H
#define GRIDBARRIER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GB_STATUS_OK = 0,
  GB_STATUS_NULL_POINTER = 1,
  GB_STATUS_INVALID_ARGUMENT = 2,
  GB_STATUS_PARSE = 3,
  GB_STATUS_VALIDATION = 4,
  GB_STATUS_IO = 5,
  GB_STATUS_NOT_ACTIVATED = 6,
  GB_STATUS_SINGULAR = 7,
  GB_STATUS_INFEASIBLE = 8,
  GB_STATUS_NUMERICAL = 9,
  GB_STATUS_PANIC = 10,
} GbStatus;

/**
 * Sensitivity model `x = B u + e`, optionally an estimate with its error bound.
 */
typedef struct GbModel GbModel;

typedef struct GbNetwork GbNetwork;

typedef struct GbTrajectory GbTrajectory;

typedef struct {
  double beta;
  double kappa;
  double c_p;
  double c_q;
  /**
   * Voltage limit as a per-unit deviation, e.g. 0.05.
   */
  double x_bar;
  double reactive_fraction;
  /**
   * Nonzero pins every upper action bound at zero.
   */
  int upper_zero;
  size_t max_iters;
  /**
   * Fixed step size; zero or negative selects `1 / L_s`.
   */
  double eta;
  double tolerance;
} GbControllerOptions;

typedef struct {
  double eta_p;
  double eta_d;
  double epsilon_reg;
  size_t max_iters;
  double tolerance;
} GbPrimalDualOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *gb_last_error_message(void);

GbControllerOptions gb_controller_default_options(void);

GbPrimalDualOptions gb_primal_dual_default_options(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
GbStatus gb_network_generate(size_t n, uint64_t seed, double overload_factor, GbNetwork **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
GbStatus gb_network_load(const char *path, GbNetwork **out);

/**
 * # Safety
 * `net` must come from this library and `path` be NUL-terminated.
 */
GbStatus gb_network_save(const GbNetwork *net, const char *path);

/**
 * Number of non-slack buses, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle from this library.
 */
size_t gb_network_bus_count(const GbNetwork *net);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void gb_network_free(GbNetwork *net);

/**
 * Exact sensitivity model of `net`.
 *
 * # Safety
 * `net` must be a live handle and `out` writable.
 */
GbStatus gb_model_build(const GbNetwork *net, GbModel **out);

/**
 * Estimate of `model` with realized relative error close to `target_error`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
GbStatus gb_model_perturb(const GbModel *model, double target_error, uint64_t seed, GbModel **out);

/**
 * Number of buses `n`; `B` has `n * 2n` entries and `e` has `n`.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t gb_model_bus_count(const GbModel *model);

/**
 * Spectral-norm error bound of an estimate; 0 for an exact model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double gb_model_error_bound(const GbModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
double gb_model_relative_error(const GbModel *model);

/**
 * Copies `B` in row-major order.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
GbStatus gb_model_sensitivity(const GbModel *model, double *out, size_t len);

/**
 * Copies the uncontrolled voltage deviation `e`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
GbStatus gb_model_drop(const GbModel *model, double *out, size_t len);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void gb_model_free(GbModel *model);

/**
 * Closed-loop barrier run of `plant` using `estimate` (or `plant` itself when
 * null). `options` may be null for defaults.
 *
 * # Safety
 * Handles must be live, `options` null or valid, `out` writable.
 */
GbStatus gb_run_barrier(const GbNetwork *net,
                        const GbModel *plant,
                        const GbModel *estimate,
                        const GbControllerOptions *options,
                        GbTrajectory **out);

/**
 * Regularized primal-dual run from the same initial action as the barrier
 * controller. Null option pointers select defaults.
 *
 * # Safety
 * Handles must be live, option pointers null or valid, `out` writable.
 */
GbStatus gb_run_primal_dual(const GbNetwork *net,
                            const GbModel *plant,
                            const GbModel *estimate,
                            const GbControllerOptions *options,
                            const GbPrimalDualOptions *pd_options,
                            GbTrajectory **out);

/**
 * Number of records (update steps plus the initial one).
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t gb_trajectory_len(const GbTrajectory *t);

/**
 * 1 if the run met its tolerance, 0 otherwise or for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
int gb_trajectory_converged(const GbTrajectory *t);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
size_t gb_trajectory_violation_steps(const GbTrajectory *t);

/**
 * Copies the per-record maximum voltage deviation.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
GbStatus gb_trajectory_max_x(const GbTrajectory *t, double *out, size_t len);

/**
 * Copies the final action (`2n` values).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
GbStatus gb_trajectory_final_u(const GbTrajectory *t, double *out, size_t len);

/**
 * # Safety
 * `t` must be a live handle and `path` NUL-terminated.
 */
GbStatus gb_trajectory_write_csv(const GbTrajectory *t, const char *path);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void gb_trajectory_free(GbTrajectory *t);

/**
 * Runs a scenario file and writes its CSVs, plots and summary into `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
GbStatus gb_scenario_run(const char *scenario_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDBARRIER_H */
