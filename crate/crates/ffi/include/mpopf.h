#ifndef MPOPF_H
#define MPOPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MpopfStatus {
  MPOPF_STATUS_OK = 0,
  MPOPF_STATUS_NULL_POINTER = 1,
  MPOPF_STATUS_INVALID_ARGUMENT = 2,
  MPOPF_STATUS_IO = 3,
  MPOPF_STATUS_PARSE = 4,
  MPOPF_STATUS_DIMENSION = 5,
  MPOPF_STATUS_INFEASIBLE = 6,
  MPOPF_STATUS_MAX_ITERATIONS = 7,
  MPOPF_STATUS_NUMERICAL = 8,
  MPOPF_STATUS_CHECKPOINT = 9,
  MPOPF_STATUS_PANIC = 10,
} MpopfStatus;

/**
 * A trained surrogate loaded from a checkpoint.
 */
typedef struct MpopfModel MpopfModel;

/**
 * A validated grid case with its shift-factor matrix.
 */
typedef struct MpopfNetwork MpopfNetwork;

/**
 * Feasible region of one demand scenario.
 */
typedef struct MpopfProblem MpopfProblem;

/**
 * A projection result together with its sensitivity.
 */
typedef struct MpopfProjection MpopfProjection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *mpopf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mpopf_version(void);

/**
 * Load a case by built-in name (`case39`, `toy3`, `toy_storage`) or path.
 *
 * # Safety
 * `reference` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MpopfStatus mpopf_network_load(const char *reference, struct MpopfNetwork **out);

/**
 * # Safety
 * `net` must come from [`mpopf_network_load`] or be NULL.
 */
void mpopf_network_free(struct MpopfNetwork *net);

/**
 * Device counts: generators, storage units, loads, buses. Any output
 * pointer may be NULL.
 *
 * # Safety
 * `net` must be a live handle.
 */
enum MpopfStatus mpopf_network_dims(const struct MpopfNetwork *net,
                                    size_t *n_g,
                                    size_t *n_e,
                                    size_t *n_d,
                                    size_t *n_b);

/**
 * Build the feasible region of one scenario (`n_d * horizon` demands).
 *
 * # Safety
 * `net` must be a live handle, `demand` must hold `n_d * horizon` values.
 */
enum MpopfStatus mpopf_problem_new(const struct MpopfNetwork *net,
                                   const double *demand,
                                   size_t horizon,
                                   struct MpopfProblem **out);

/**
 * # Safety
 * `problem` must come from [`mpopf_problem_new`] or be NULL.
 */
void mpopf_problem_free(struct MpopfProblem *problem);

/**
 * Length of a stacked schedule for this problem; 0 for a NULL handle.
 *
 * # Safety
 * `problem` must be a live handle or NULL.
 */
size_t mpopf_problem_dim(const struct MpopfProblem *problem);

/**
 * Exact least-cost dispatch. Writes the schedule to `x` (capacity `len`)
 * and its generation cost to `cost` (may be NULL).
 *
 * # Safety
 * `problem` must be a live handle and `x` must hold `len` values.
 */
enum MpopfStatus mpopf_dispatch(const struct MpopfProblem *problem,
                                double *x,
                                size_t len,
                                double *cost);

/**
 * Euclidean projection of `z` onto the feasible region, kept with its
 * sensitivity for [`mpopf_projection_vjp`].
 *
 * # Safety
 * `problem` must be a live handle and `z` must hold `len` values.
 */
enum MpopfStatus mpopf_project(const struct MpopfProblem *problem,
                               const double *z,
                               size_t len,
                               struct MpopfProjection **out);

/**
 * # Safety
 * `proj` must come from [`mpopf_project`] or be NULL.
 */
void mpopf_projection_free(struct MpopfProjection *proj);

/**
 * Copy the projected schedule into `x`.
 *
 * # Safety
 * `proj` must be a live handle and `x` must hold `len` values.
 */
enum MpopfStatus mpopf_projection_x(const struct MpopfProjection *proj, double *x, size_t len);

/**
 * Vector-Jacobian product `grad_z = (∂x/∂z)ᵀ grad_x`.
 *
 * # Safety
 * `proj` must be a live handle; both buffers must hold `len` values.
 */
enum MpopfStatus mpopf_projection_vjp(const struct MpopfProjection *proj,
                                      const double *grad_x,
                                      double *grad_z,
                                      size_t len);

/**
 * Load a training checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MpopfStatus mpopf_model_load(const char *path, struct MpopfModel **out);

/**
 * # Safety
 * `model` must come from [`mpopf_model_load`] or be NULL.
 */
void mpopf_model_free(struct MpopfModel *model);

/**
 * Feasible schedule predicted by `model` for one scenario; `cost` may be NULL.
 *
 * # Safety
 * Handles must be live, `demand` must hold `n_d * horizon` values and `x`
 * must hold `len` values.
 */
enum MpopfStatus mpopf_model_infer(const struct MpopfModel *model,
                                   const struct MpopfNetwork *net,
                                   const double *demand,
                                   size_t horizon,
                                   double *x,
                                   size_t len,
                                   double *cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPOPF_H */
