#ifndef GEOPROX_H
#define GEOPROX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The first four match the exit codes of the command-line tool.
 */
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_VERIFICATION_FAILED = 1,
  GP_STATUS_CONFIG = 2,
  GP_STATUS_DOMAIN_ESCAPE = 3,
  GP_STATUS_INVALID_ARGUMENT = 4,
  GP_STATUS_UNSUPPORTED = 5,
  GP_STATUS_NUMERIC = 6,
  GP_STATUS_INTERNAL = 7,
} GpStatus;

/**
 * Validity of a predicted rate.
 */
typedef enum GpRateValidity {
  GP_RATE_VALIDITY_VALID = 0,
  GP_RATE_VALIDITY_BELOW_LOWER_BOUND = 1,
  GP_RATE_VALIDITY_AT_OR_ABOVE_ONE = 2,
} GpRateValidity;

/**
 * An operator bound to the space it was built for.
 */
typedef struct GpOperator GpOperator;

/**
 * A model space: Euclidean space or a spherical cap.
 */
typedef struct GpSpace GpSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *gp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void gp_string_free(char *s);

/**
 * Euclidean space of dimension `dim`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpStatus gp_space_euclidean(size_t dim, struct GpSpace **out);

/**
 * Cap of intrinsic radius `radius` about `center` (length `dim + 1`) on the
 * sphere of curvature `curvature`.
 *
 * # Safety
 * `center` must point to `dim + 1` values; `out` must be valid.
 */
enum GpStatus gp_space_sphere_cap(size_t dim,
                                  double curvature,
                                  const double *center,
                                  double radius,
                                  struct GpSpace **out);

/**
 * Space from its JSON description, as in the `space` field of a config.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
enum GpStatus gp_space_from_json(const char *json, struct GpSpace **out);

/**
 * # Safety
 * `space` must come from a `gp_space_*` constructor or be null.
 */
void gp_space_free(struct GpSpace *space);

/**
 * Length of coordinate vectors for points of `space`, or 0 for null.
 *
 * # Safety
 * `space` must be a live handle or null.
 */
size_t gp_space_ambient_dim(const struct GpSpace *space);

/**
 * Uniform convexity modulus `c` of the space.
 *
 * # Safety
 * `space` must be a live handle; `out` must be valid.
 */
enum GpStatus gp_space_modulus(const struct GpSpace *space, double *out);

/**
 * Geodesic distance between two points of ambient length.
 *
 * # Safety
 * `x` and `y` must point to `gp_space_ambient_dim(space)` values.
 */
enum GpStatus gp_distance(const struct GpSpace *space,
                          const double *x,
                          const double *y,
                          double *out);

/**
 * Point at fraction `t` along the geodesic from `x` to `y`.
 *
 * # Safety
 * `x`, `y` and `out` must each hold `gp_space_ambient_dim(space)` values.
 */
enum GpStatus gp_geodesic(const struct GpSpace *space,
                          const double *x,
                          const double *y,
                          double t,
                          double *out);

/**
 * Convexity modulus of a cap of radius `delta` on the sphere of curvature
 * `kappa`.
 *
 * # Safety
 * `out` must be valid.
 */
enum GpStatus gp_local_convexity_constant(double kappa, double delta, double *out);

/**
 * Operator from JSON with sets and functions given inline, for example
 * `{"type": "project", "set": {"type": "ball", "center": [0, 0], "radius": 1}}`.
 *
 * # Safety
 * `space` must be live; `json` NUL-terminated; `out` valid.
 */
enum GpStatus gp_operator_from_json(const struct GpSpace *space,
                                    const char *json,
                                    struct GpOperator **out);

/**
 * # Safety
 * `op` must come from [`gp_operator_from_json`] or be null.
 */
void gp_operator_free(struct GpOperator *op);

/**
 * Apply the operator to `x`.
 *
 * # Safety
 * `x` and `out` must hold the ambient dimension of the operator's space.
 */
enum GpStatus gp_operator_apply(const struct GpOperator *op, const double *x, double *out);

/**
 * Firmness constants `(alpha, epsilon)` of the operator from the calculus.
 *
 * # Safety
 * `op` must be live; outputs valid.
 */
enum GpStatus gp_operator_certificate(const struct GpOperator *op, double *alpha, double *epsilon);

/**
 * Linear rate predicted by `(alpha, epsilon)` and modulus `mu` in a space
 * with exponent `p` and modulus `c`.
 *
 * # Safety
 * Outputs must be valid.
 */
enum GpStatus gp_rate(double alpha,
                      double epsilon,
                      double p,
                      double c,
                      double mu,
                      double *gamma,
                      enum GpRateValidity *validity);

/**
 * Weighted `p`-barycenter of `count` points stored row by row in `points`.
 *
 * # Safety
 * `points` must hold `count * ambient_dim` values, `weights` `count`
 * values and `out` `ambient_dim` values.
 */
enum GpStatus gp_barycenter(const struct GpSpace *space,
                            const double *points,
                            size_t count,
                            const double *weights,
                            double p,
                            double *out);

/**
 * Run an experiment config (JSON text) and return the report JSON. A
 * negative `seed` keeps the seed of the config. Returns
 * `GP_STATUS_VERIFICATION_FAILED` or `GP_STATUS_DOMAIN_ESCAPE` with the
 * report still written when the run completes but does not pass.
 *
 * # Safety
 * `config` NUL-terminated; `report` valid.
 */
enum GpStatus gp_run_config(const char *config, int64_t seed, char **report);

/**
 * Run the invariant suites and return the report JSON.
 *
 * # Safety
 * `report` must be valid.
 */
enum GpStatus gp_verify(uint64_t seed, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOPROX_H */
