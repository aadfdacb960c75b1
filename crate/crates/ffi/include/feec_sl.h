#ifndef FEEC_SL_H
#define FEEC_SL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FeecStatus {
  FEEC_STATUS_OK = 0,
  FEEC_STATUS_NULL_POINTER = 1,
  FEEC_STATUS_INVALID_ARGUMENT = 2,
  FEEC_STATUS_MESH_ERROR = 3,
  FEEC_STATUS_OUTSIDE_DOMAIN = 4,
  FEEC_STATUS_SOLVER_ERROR = 5,
  FEEC_STATUS_IO = 6,
  FEEC_STATUS_PANIC = 7,
} FeecStatus;

typedef struct FeecMesh FeecMesh;

typedef struct FeecSimulation FeecSimulation;

typedef struct FeecConfig {
  /**
   * 1 or 2
   */
  uint32_t order;
  double tau;
  double t_final;
  double eps;
  /**
   * Non-zero enables the energy-preserving correction.
   */
  uint32_t conservative;
} FeecConfig;

/**
 * Initial velocity callback: writes the velocity at `(x, y)` into `out[0..2]`.
 */
typedef void (*FeecVelocityFn)(double x, double y, double *out, void *user);

typedef struct FeecStepInfo {
  size_t step;
  double t;
  double energy;
  double mu;
  size_t inner_iterations;
  double divergence_residual;
} FeecStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *feec_last_error_message(void);

/**
 * Structured `n × n` mesh of `[x0, x1] × [y0, y1]`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FeecStatus feec_mesh_structured(size_t n,
                                     double x0,
                                     double x1,
                                     double y0,
                                     double y1,
                                     struct FeecMesh **out);

/**
 * Unstructured disk mesh with `rings` rings.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FeecStatus feec_mesh_disk(size_t rings, double radius, struct FeecMesh **out);

/**
 * Reads a mesh file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FeecStatus feec_mesh_load(const char *path, struct FeecMesh **out);

/**
 * Writes vertex, edge and triangle counts; any pointer may be null.
 *
 * # Safety
 * `mesh` must be a live handle; non-null outputs must be writable.
 */
enum FeecStatus feec_mesh_counts(const struct FeecMesh *mesh,
                                 size_t *vertices,
                                 size_t *edges,
                                 size_t *triangles);

/**
 * # Safety
 * `mesh` must be null or a handle not yet freed.
 */
void feec_mesh_free(struct FeecMesh *mesh);

/**
 * Creates a simulation on `mesh`. The initial velocity is sampled through
 * `initial` and made discretely divergence free. The mesh handle may be
 * freed afterwards.
 *
 * # Safety
 * `mesh` must be a live handle, `out` a valid pointer and `initial` safe to
 * call with `user` from any thread for the duration of this call.
 */
enum FeecStatus feec_simulation_new(const struct FeecMesh *mesh,
                                    struct FeecConfig config,
                                    FeecVelocityFn initial,
                                    void *user,
                                    struct FeecSimulation **out);

/**
 * Advances one step; `info` may be null.
 *
 * # Safety
 * `sim` must be a live handle; `info`, if non-null, must be writable.
 */
enum FeecStatus feec_simulation_step(struct FeecSimulation *sim, struct FeecStepInfo *info);

/**
 * Current time and discrete energy; either pointer may be null.
 *
 * # Safety
 * `sim` must be a live handle; non-null outputs must be writable.
 */
enum FeecStatus feec_simulation_state(const struct FeecSimulation *sim,
                                      double *time,
                                      double *energy);

/**
 * Velocity at `(x, y)` written into `out[0..2]`.
 *
 * # Safety
 * `sim` must be a live handle and `out` point to two writable doubles.
 */
enum FeecStatus feec_simulation_velocity(const struct FeecSimulation *sim,
                                         double x,
                                         double y,
                                         double *out);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void feec_simulation_free(struct FeecSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEEC_SL_H */
