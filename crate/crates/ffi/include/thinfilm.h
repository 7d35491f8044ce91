#ifndef THINFILM_H
#define THINFILM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bit flags for `tf_mesh_new_rect`.
 */
#define TF_SIDE_BOTTOM 1

#define TF_SIDE_RIGHT 2

#define TF_SIDE_TOP 4

#define TF_SIDE_LEFT 8

/**
 * Result codes. `Ok` is zero; the rest mirror the CLI exit codes where one
 * exists.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_INVALID_ARGUMENT = 1,
  TF_STATUS_CONFIG = 2,
  TF_STATUS_NONCONVERGENCE = 3,
  TF_STATUS_IO = 4,
  TF_STATUS_NULL_POINTER = 5,
  TF_STATUS_BUFFER_TOO_SMALL = 6,
  TF_STATUS_PANIC = 7,
} TfStatus;

/**
 * Opaque triangulation of a rectangle.
 */
typedef struct TfMesh TfMesh;

/**
 * Opaque time-dependent run of one scenario.
 */
typedef struct TfSimulation TfSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length without
 * the terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t tf_last_error_message(char *buf, size_t len);

/**
 * Structured `nx × nz` mesh of `[x0,x1]×[z0,z1]`. `dirichlet` is a mask of
 * `TF_SIDE_*` flags.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum TfStatus tf_mesh_new_rect(size_t nx,
                               size_t nz,
                               double x0,
                               double x1,
                               double z0,
                               double z1,
                               uint32_t dirichlet,
                               struct TfMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from `tf_mesh_new_rect` not yet freed.
 */
void tf_mesh_free(struct TfMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t tf_mesh_num_nodes(const struct TfMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t tf_mesh_num_triangles(const struct TfMesh *mesh);

/**
 * Writes node coordinates as `x0, z0, x1, z1, ...`; `len` counts doubles.
 *
 * # Safety
 * `mesh` must be a live handle and `xz` valid for `len` doubles.
 */
enum TfStatus tf_mesh_nodes(const struct TfMesh *mesh, double *xz, size_t len);

/**
 * Writes counter-clockwise vertex triples; `len` counts indices.
 *
 * # Safety
 * `mesh` must be a live handle and `tri` valid for `len` values.
 */
enum TfStatus tf_mesh_triangles(const struct TfMesh *mesh, size_t *tri, size_t len);

/**
 * Rankine–Hugoniot speed of the flux `Σ coeffs[k] u^k` between two states.
 *
 * # Safety
 * `coeffs` must be valid for `n` doubles and `speed` writable.
 */
enum TfStatus tf_rankine_hugoniot_speed(const double *coeffs,
                                        size_t n,
                                        double u_minus,
                                        double u_plus,
                                        double *speed);

/**
 * Sets up a run of `scenario` (`converge`, `tw1`..`tw3`, `finger`) with its
 * defaults, then applies `config`, a `key = value` text that may be null.
 * The initial mesh adaptation happens here.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum TfStatus tf_simulation_new(const char *scenario,
                                const char *config,
                                struct TfSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from `tf_simulation_new` not yet freed.
 */
void tf_simulation_free(struct TfSimulation *sim);

/**
 * Advances `steps` time steps (each preceded by a mesh cycle when moving).
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum TfStatus tf_simulation_step(struct TfSimulation *sim, size_t steps);

/**
 * Advances to `t_end`, shortening the last step to land on it.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum TfStatus tf_simulation_run_until(struct TfSimulation *sim, double t_end);

/**
 * # Safety
 * `sim` must be null or a live handle.
 */
double tf_simulation_time(const struct TfSimulation *sim);

/**
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t tf_simulation_num_nodes(const struct TfSimulation *sim);

/**
 * Copies the film thickness at the nodes.
 *
 * # Safety
 * `sim` must be a live handle and `u` valid for `len` doubles.
 */
enum TfStatus tf_simulation_get_u(const struct TfSimulation *sim, double *u, size_t len);

/**
 * Copies the current (moved) node coordinates as `x0, z0, x1, z1, ...`.
 *
 * # Safety
 * `sim` must be a live handle and `xz` valid for `len` doubles.
 */
enum TfStatus tf_simulation_get_nodes(const struct TfSimulation *sim, double *xz, size_t len);

/**
 * Writes the current mesh with `u` and `w` as legacy VTK.
 *
 * # Safety
 * `sim` must be a live handle and `path` NUL-terminated.
 */
enum TfStatus tf_simulation_write_vtk(const struct TfSimulation *sim, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THINFILM_H */
