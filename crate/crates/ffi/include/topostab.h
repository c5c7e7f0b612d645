#ifndef TOPOSTAB_H
#define TOPOSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes shared by every fallible function.
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_INVALID_ARGUMENT = 2,
  TS_STATUS_PARSE = 3,
  TS_STATUS_COMPUTE = 4,
  TS_STATUS_BUFFER_TOO_SMALL = 5,
  TS_STATUS_PANIC = 6,
} TsStatus;

// Fitted CDER model.
typedef struct TsCderModel TsCderModel;

// Weighted point cloud in R³.
typedef struct TsCloud TsCloud;

// Persistence diagrams indexed by homological dimension.
typedef struct TsDiagrams TsDiagrams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ts_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call or [`ts_clear_error`] on this thread.
const char *ts_last_error(void);

void ts_clear_error(void);

// Parse the ATOM records of PDB text and weight each atom by its van der
// Waals radius.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum TsStatus ts_cloud_from_pdb(const char *text, struct TsCloud **out);

// Cloud from `n` points stored as `x0 y0 z0 x1 y1 z1 ...`. `radii` holds `n`
// non-negative radii or is NULL for an unweighted cloud.
//
// # Safety
// `xyz` must point to `3 n` doubles, `radii` to `n` doubles or be NULL, and
// `out` must be writable.
enum TsStatus ts_cloud_from_arrays(const double *xyz,
                                   const double *radii,
                                   size_t n,
                                   struct TsCloud **out);

// Number of points, or 0 for NULL.
//
// # Safety
// `cloud` must be NULL or a live handle.
size_t ts_cloud_len(const struct TsCloud *cloud);

// Copy the radii of the cloud into `radii` (capacity `capacity`).
//
// # Safety
// `cloud` must be a live handle and `radii` must hold `capacity` doubles.
enum TsStatus ts_cloud_radii(const struct TsCloud *cloud, double *radii, size_t capacity);

// # Safety
// `cloud` must be NULL or a handle not yet freed.
void ts_cloud_free(struct TsCloud *cloud);

// Weighted alpha persistence in dimensions `0..=max_dim` (`max_dim <= 2`).
// Values are squared radii; vertices enter at `-r^2`.
//
// # Safety
// `cloud` must be a live handle and `out` writable.
enum TsStatus ts_diagrams_alpha(const struct TsCloud *cloud,
                                size_t max_dim,
                                struct TsDiagrams **out);

// Vietoris–Rips persistence up to scale `max_scale` in dimensions
// `0..=max_dim` (`max_dim <= 2`). Radii are ignored.
//
// # Safety
// `cloud` must be a live handle and `out` writable.
enum TsStatus ts_diagrams_rips(const struct TsCloud *cloud,
                               double max_scale,
                               size_t max_dim,
                               struct TsDiagrams **out);

// Number of pairs in dimension `dim`, or 0 when absent.
//
// # Safety
// `diagrams` must be NULL or a live handle.
size_t ts_diagrams_count(const struct TsDiagrams *diagrams, size_t dim);

// Copy the pairs of dimension `dim` into `births`/`deaths`, each holding
// `capacity` doubles. Essential classes have death `+INFINITY`.
//
// # Safety
// `diagrams` must be a live handle; `births` and `deaths` must each hold
// `capacity` doubles.
enum TsStatus ts_diagrams_get(const struct TsDiagrams *diagrams,
                              size_t dim,
                              double *births,
                              double *deaths,
                              size_t capacity);

// # Safety
// `diagrams` must be NULL or a handle not yet freed.
void ts_diagrams_free(struct TsDiagrams *diagrams);

// Load a model saved as `cder_model.json`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum TsStatus ts_cder_model_from_json(const char *json, struct TsCderModel **out);

// Length of the feature vector, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t ts_cder_model_num_features(const struct TsCderModel *model);

// Feature vector of one sample's diagrams. Dimensions the model uses but
// `diagrams` lacks are treated as empty.
//
// # Safety
// `model` and `diagrams` must be live handles; `out` must hold `capacity`
// doubles.
enum TsStatus ts_cder_model_vectorize(const struct TsCderModel *model,
                                      const struct TsDiagrams *diagrams,
                                      double *out,
                                      size_t capacity);

// # Safety
// `model` must be NULL or a handle not yet freed.
void ts_cder_model_free(struct TsCderModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPOSTAB_H */
