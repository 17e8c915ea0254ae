#ifndef MORSE_ENTROPY_H
#define MORSE_ENTROPY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ME_OK 0

#define ME_ERR_NULL_POINTER 1

#define ME_ERR_INVALID_ARGUMENT 2

#define ME_ERR_MODEL 3

#define ME_ERR_COMPUTE 4

#define ME_ERR_IO 5

#define ME_ERR_BUFFER_TOO_SMALL 6

#define ME_ERR_PANIC 7

/**
 * Opaque critical-point catalog.
 */
typedef struct MeCatalog MeCatalog;

/**
 * Opaque potential model.
 */
typedef struct MeModel MeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *me_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated). `*len_out` receives the full message length without the
 * terminator. Returns `ME_ERR_BUFFER_TOO_SMALL` when it does not fit.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes (or null with `cap == 0`);
 * `len_out` may be null.
 */
int32_t me_last_error_message(char *buf, size_t cap, size_t *len_out);

/**
 * Creates a built-in model (`harmonic`, `uncoupled_double_well`,
 * `lattice_phi4_1d`, `xy_chain_1d`) with default parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` a valid pointer.
 */
int32_t me_model_builtin(const char *name, size_t n, MeModel **out);

/**
 * Compiles a model from expression source over `q[0] .. q[n-1]`.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` a valid pointer.
 */
int32_t me_model_from_dsl(const char *source, size_t n, MeModel **out);

/**
 * Replaces the model's domain box by `[lo, hi]^N`.
 *
 * # Safety
 * `model` must come from this library and not be freed.
 */
int32_t me_model_set_box(MeModel *model, double lo, double hi);

/**
 * Adds the linear term `a·q` (length `n` must equal the dimension).
 *
 * # Safety
 * `model` must be live; `a` valid for `n` doubles.
 */
int32_t me_model_perturb(MeModel *model, const double *a, size_t n);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void me_model_free(MeModel *model);

/**
 * # Safety
 * `model` must be live; `out` valid.
 */
int32_t me_model_dim(const MeModel *model, size_t *out);

/**
 * `V(q)`.
 *
 * # Safety
 * `q` valid for `n` doubles; `out` valid.
 */
int32_t me_model_value(const MeModel *model, const double *q, size_t n, double *out);

/**
 * `∇V(q)` written to `grad` (length `n`).
 *
 * # Safety
 * `q` and `grad` valid for `n` doubles.
 */
int32_t me_model_gradient(const MeModel *model, const double *q, size_t n, double *grad);

/**
 * Multistart search for critical points with `V <= v_max`. `starts = 0`
 * selects the default count; `workers = 0` uses all cores.
 *
 * # Safety
 * `model` must be live; `out` valid.
 */
int32_t me_find_critical_points(const MeModel *model,
                                double v_max,
                                uint64_t seed,
                                size_t starts,
                                size_t workers,
                                MeCatalog **out);

/**
 * Releases a catalog. Null is ignored.
 *
 * # Safety
 * `catalog` must come from this library and not be used afterwards.
 */
void me_catalog_free(MeCatalog *catalog);

/**
 * # Safety
 * `catalog` must be live; `out` valid.
 */
int32_t me_catalog_len(const MeCatalog *catalog, size_t *out);

/**
 * Point `i` in catalog order (by value, then coordinates). `coords` must
 * hold `n` doubles, `n` being the model dimension.
 *
 * # Safety
 * All out-pointers valid; `coords` valid for `n` doubles.
 */
int32_t me_catalog_point(const MeCatalog *catalog,
                         size_t i,
                         double *coords,
                         size_t n,
                         double *value,
                         size_t *index);

/**
 * Euler characteristic of `M_v` from the catalog.
 *
 * # Safety
 * `catalog` must be live; `out` valid.
 */
int32_t me_catalog_euler(const MeCatalog *catalog, double v, int64_t *out);

/**
 * Writes the catalog as JSON into `buf`; `*len_out` receives the length
 * without the terminator.
 *
 * # Safety
 * `buf` valid for `cap` bytes (or null with `cap == 0`); `len_out` valid.
 */
int32_t me_catalog_to_json(const MeCatalog *catalog, char *buf, size_t cap, size_t *len_out);

/**
 * Hit-or-miss estimate of `vol{V <= v}` in the model's box.
 *
 * # Safety
 * `model` must be live; out-pointers valid.
 */
int32_t me_sublevel_volume(const MeModel *model,
                           double v,
                           uint64_t n_samples,
                           uint64_t seed,
                           size_t workers,
                           double *mean,
                           double *stderr);

/**
 * Slice integral `F(ξ, k, N)` with wall parameter `r`, `0 < k < N`, `N > 2`.
 *
 * # Safety
 * `out` valid.
 */
int32_t me_eval_f(double xi, size_t k, size_t n, double r, double *out);

/**
 * Neighborhood coefficient `A(N, k, ε₀, r)`.
 *
 * # Safety
 * `out` valid.
 */
int32_t me_coefficient_a(size_t n, size_t k, double eps0, double r, double *out);

/**
 * Band coefficient `B(N, k, Δv, ε₀, r)` times the Jacobian factor `j`.
 *
 * # Safety
 * `out` valid.
 */
int32_t me_coefficient_b(size_t n,
                         size_t k,
                         double delta_v,
                         double eps0,
                         double r,
                         double j,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MORSE_ENTROPY_H */
