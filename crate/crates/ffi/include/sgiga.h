#ifndef SGIGA_H
#define SGIGA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which enriched methods get the projection and orthogonalization.
 */
typedef enum SgigaStabilization {
  /**
   * GIGA* and SGIGA2 only.
   */
  SGIGA_STABILIZATION_DEFAULT = 0,
  /**
   * Every enriched method.
   */
  SGIGA_STABILIZATION_ALL = 1,
  /**
   * None.
   */
  SGIGA_STABILIZATION_OFF = 2,
} SgigaStabilization;

/**
 * Result code of every call.
 */
typedef enum SgigaStatus {
  SGIGA_STATUS_OK = 0,
  SGIGA_STATUS_NULL_POINTER = 1,
  SGIGA_STATUS_INVALID_ARGUMENT = 2,
  SGIGA_STATUS_NUMERICAL_FAILURE = 3,
  SGIGA_STATUS_PANIC = 4,
} SgigaStatus;

/**
 * Manufactured benchmark problems.
 */
typedef enum SgigaExample {
  SGIGA_EXAMPLE_LINE = 0,
  SGIGA_EXAMPLE_CIRCLE = 1,
  SGIGA_EXAMPLE_ARC = 2,
} SgigaExample;

/**
 * Discretization methods.
 */
typedef enum SgigaMethod {
  SGIGA_METHOD_IGA = 0,
  SGIGA_METHOD_GIGA = 1,
  SGIGA_METHOD_SGIGA = 2,
  SGIGA_METHOD_CORRECTED_GIGA = 3,
  SGIGA_METHOD_SGIGA_MULTI = 4,
  SGIGA_METHOD_GIGA_STAR = 5,
  SGIGA_METHOD_SGIGA2 = 6,
} SgigaMethod;

/**
 * Opaque experiment handle.
 */
typedef struct SgigaExperiment SgigaExperiment;

/**
 * Solver options for [`sgiga_solve`].
 */
typedef struct SgigaOptions {
  /**
   * Quadtree depth inside cut elements.
   */
  uint32_t quad_depth;
  /**
   * Gauss points per direction.
   */
  uint32_t gauss;
  /**
   * Compute the scaled condition number (expensive on fine meshes).
   */
  bool compute_scn;
  /**
   * Which methods get the projection and orthogonalization.
   */
  enum SgigaStabilization stabilization;
} SgigaOptions;

/**
 * Outcome of one solve.
 */
typedef struct SgigaResult {
  size_t dofs;
  size_t dropped;
  double h;
  double l2_error;
  double h1_error;
  /**
   * NaN when not requested.
   */
  double scn;
  double residual;
} SgigaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: depth 5, 3 Gauss points, SCN on, default stabilization.
 */
struct SgigaOptions sgiga_default_options(void);

/**
 * Create one of the benchmark experiments with coefficients `a0`, `a1`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SgigaStatus sgiga_experiment_new(enum SgigaExample example,
                                      double a0,
                                      double a1,
                                      struct SgigaExperiment **out);

/**
 * Create the robustness experiment with a straight interface at offset `delta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SgigaStatus sgiga_robustness_new(double a0,
                                      double a1,
                                      double delta,
                                      struct SgigaExperiment **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `exp` must be null or a handle returned by this library that has not been freed.
 */
void sgiga_experiment_free(struct SgigaExperiment *exp);

/**
 * Number of unknowns of `method` on an `n × n` mesh, without solving.
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum SgigaStatus sgiga_dof_count(const struct SgigaExperiment *exp,
                                 enum SgigaMethod method,
                                 size_t n,
                                 size_t *out);

/**
 * Solve on an `n × n` mesh and measure errors against the exact solution.
 *
 * # Safety
 * `exp` must be a live handle, `options` null (defaults) or valid, `out` valid.
 */
enum SgigaStatus sgiga_solve(const struct SgigaExperiment *exp,
                             enum SgigaMethod method,
                             size_t n,
                             const struct SgigaOptions *options,
                             struct SgigaResult *out);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t sgiga_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sgiga_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGIGA_H */
