#ifndef AMALGAM_H
#define AMALGAM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AmStatus {
  AM_STATUS_OK = 0,
  AM_STATUS_NULL_POINTER = 1,
  AM_STATUS_INVALID_ARGUMENT = 2,
  AM_STATUS_SIZE_LIMIT = 3,
  AM_STATUS_NOT_IN_SPAN = 4,
  AM_STATUS_NUMERIC = 5,
  AM_STATUS_IO = 6,
  AM_STATUS_PANIC = 7,
} AmStatus;

/**
 * A context `M ⊃ B ⊃ D`.
 */
typedef struct AmContext AmContext;

/**
 * A moment or cumulant series with its context.
 */
typedef struct AmSeries AmSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Free with
 * [`am_string_free`].
 */
char *am_last_error(void);

/**
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void am_string_free(char *s);

/**
 * Number of non-crossing partitions (or pair partitions) of `n` points.
 *
 * # Safety
 * `out` points to writable memory.
 */
enum AmStatus am_nc_count(size_t n, bool pairs, uint64_t *out);

/**
 * Builds a context from its JSON description.
 *
 * # Safety
 * `json` is a NUL-terminated string and `out` points to writable memory.
 */
enum AmStatus am_context_from_json(const char *json, struct AmContext **out);

/**
 * Dimensions of `B` and `D`.
 *
 * # Safety
 * `ctx` is a live handle; `b_dim` and `d_dim` point to writable memory.
 */
enum AmStatus am_context_dims(const struct AmContext *ctx, size_t *b_dim, size_t *d_dim);

/**
 * # Safety
 * `ctx` is null or a handle from [`am_context_from_json`] not yet freed.
 */
void am_context_free(struct AmContext *ctx);

/**
 * Reads a series document. A context given by path is resolved against the
 * working directory; `ctx`, when non-null, overrides it.
 *
 * # Safety
 * `json` is a NUL-terminated string, `ctx` is null or a live handle, and
 * `out` points to writable memory.
 */
enum AmStatus am_series_from_json(const char *json,
                                  const struct AmContext *ctx,
                                  struct AmSeries **out);

/**
 * Writes the series as a JSON document. Free the string with [`am_string_free`].
 *
 * # Safety
 * `series` is a live handle and `out` points to writable memory.
 */
enum AmStatus am_series_to_json(const struct AmSeries *series, char **out);

/**
 * Moments become cumulants and cumulants become moments, up to `order`
 * (0 means the order cap of the input).
 *
 * # Safety
 * `series` is a live handle and `out` points to writable memory.
 */
enum AmStatus am_series_transform(const struct AmSeries *series,
                                  size_t order,
                                  struct AmSeries **out);

/**
 * Tests `κ = F∘κ∘F` for a cumulant series over `B` up to `order` (0 means
 * the order cap).
 *
 * # Safety
 * `series` is a live handle; `max_deviation` and `passes` point to writable memory.
 */
enum AmStatus am_factorization_check(const struct AmSeries *series,
                                     size_t order,
                                     double *max_deviation,
                                     bool *passes);

/**
 * # Safety
 * `series` is null or a handle from this library not yet freed.
 */
void am_series_free(struct AmSeries *series);

/**
 * Predicted moments `m_1..m_{k_max}` of the band ensemble with the given
 * profile (`builtin:…` or a JSON path) on a grid of `grid` points, written
 * to `out[0..k_max]`.
 *
 * # Safety
 * `profile` is a NUL-terminated string and `out` has room for `k_max` values.
 */
enum AmStatus am_band_predict(const char *profile, size_t k_max, size_t grid, double *out);

/**
 * Whether the row integrals of the profile are constant, and their range.
 *
 * # Safety
 * `profile` is a NUL-terminated string; `holds` and `range` point to writable memory.
 */
enum AmStatus am_band_criterion(const char *profile,
                                size_t grid,
                                double tolerance,
                                bool *holds,
                                double *range);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMALGAM_H */
