#ifndef HOTSPOTS_H
#define HOTSPOTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_PARAMETER = 2,
  HS_STATUS_NUMERICAL = 3,
  HS_STATUS_CONVEXITY = 4,
  HS_STATUS_BUFFER_TOO_SMALL = 5,
  HS_STATUS_PANIC = 6,
} HsStatus;

/**
 * Ground eigenpair of a pair.
 */
typedef struct HsEigen HsEigen;

/**
 * A convex pair: a rectangle grid with a potential sampled at its nodes.
 */
typedef struct HsPair HsPair;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Copies the last error of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hs_last_error_message(char *buf, size_t len);

/**
 * `[-pi/2, pi/2] x [-1, 1]` with `V = 0` on an `nx x ny` grid.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum HsStatus hs_pair_rectangle(size_t nx, size_t ny, struct HsPair **out);

/**
 * The rectangle with potential `eps V_q` built from the profile of
 * mollifier width `delta`, in normalized units.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum HsStatus hs_pair_perturbed(size_t nx,
                                size_t ny,
                                double delta,
                                double eps,
                                struct HsPair **out);

/**
 * A pair on `[x_min, x_max] x [y_min, y_max]` from node values ordered
 * `k = i * (ny + 1) + j`. The potential must pass the convexity certificate.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` to a handle slot.
 */
enum HsStatus hs_pair_from_values(double x_min,
                                  double x_max,
                                  double y_min,
                                  double y_max,
                                  size_t nx,
                                  size_t ny,
                                  const double *values,
                                  size_t len,
                                  struct HsPair **out);

/**
 * Number of grid nodes of a pair, or 0 for a null handle.
 *
 * # Safety
 * `pair` must be null or a live handle.
 */
size_t hs_pair_len(const struct HsPair *pair);

/**
 * # Safety
 * `pair` must be null or a handle not yet freed.
 */
void hs_pair_free(struct HsPair *pair);

/**
 * Ground Neumann eigenpair of the weighted Laplacian of `pair`.
 *
 * # Safety
 * `pair` must be a live handle and `out` a valid handle slot.
 */
enum HsStatus hs_eigen_solve(const struct HsPair *pair, double tol, struct HsEigen **out);

/**
 * First two nonzero eigenvalues and the gap flag.
 *
 * # Safety
 * `e` must be a live handle; output pointers may be null.
 */
enum HsStatus hs_eigen_values(const struct HsEigen *e,
                              double *lambda1,
                              double *lambda2,
                              bool *gap_ok);

/**
 * Copies the eigenfunction (node order as in [`hs_pair_from_values`]).
 *
 * # Safety
 * `e` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum HsStatus hs_eigen_copy_phi(const struct HsEigen *e, double *buf, size_t len);

/**
 * Bilinear value of the eigenfunction at `(x, y)`.
 *
 * # Safety
 * `e` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_eigen_value_at(const struct HsEigen *e, double x, double y, double *out);

/**
 * # Safety
 * `e` must be null or a handle not yet freed.
 */
void hs_eigen_free(struct HsEigen *e);

/**
 * First nonzero Neumann eigenvalue of the unit ball in `R^(d+1)` on `n` radial cells.
 */
double hs_ball_eigenvalue(uint32_t d, size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOTSPOTS_H */
