/* C interface of the fi-fuse feature-importance fusion library. */

#ifndef FI_FUSE_H
#define FI_FUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
enum FifStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  FIF_STATUS_OK = 0,
  FIF_STATUS_NULL_ARGUMENT = -1,
  FIF_STATUS_INVALID_UTF8 = -2,
  FIF_STATUS_IO_ERROR = -3,
  FIF_STATUS_FORMAT_ERROR = -4,
  FIF_STATUS_UNKNOWN_METHOD = -5,
  FIF_STATUS_FUSION_ERROR = -6,
  FIF_STATUS_FUZZY_ERROR = -7,
  FIF_STATUS_BUFFER_TOO_SMALL = -8,
  FIF_STATUS_INDEX_OUT_OF_RANGE = -9,
};
#ifndef __cplusplus
typedef int32_t FifStatus;
#endif // __cplusplus

/**
 * Opaque handle over a loaded importance tensor and its fuzzy report.
 */
typedef struct FifTensor FifTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message (NUL-terminated, truncated
 * to `cap - 1` bytes). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (then only the
 * length is returned).
 */
uintptr_t fif_last_error(char *buf, uintptr_t cap);

/**
 * Load a tensor CSV (header `model,technique,repetition,<features>`) into a
 * new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
FifStatus fif_tensor_load_csv(const char *path, struct FifTensor **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `handle` must have come from `fif_tensor_load_csv` and not been freed.
 */
void fif_tensor_free(struct FifTensor *handle);

/**
 * Number of features (columns) in the tensor.
 *
 * # Safety
 * `handle` must be a live handle.
 */
uintptr_t fif_tensor_num_features(const struct FifTensor *handle);

/**
 * Number of sources (rows: model x technique x repetition) in the tensor.
 *
 * # Safety
 * `handle` must be a live handle.
 */
uintptr_t fif_tensor_num_sources(const struct FifTensor *handle);

/**
 * Copy the NUL-terminated name of feature `index` into `buf`.
 *
 * # Safety
 * `handle` must be live; `buf` must point to `cap` writable bytes.
 */
FifStatus fif_tensor_feature_name(const struct FifTensor *handle,
                                  uintptr_t index,
                                  char *buf,
                                  uintptr_t cap);

/**
 * Fuse the tensor with one method ("mean", "median", "mode", "box-whiskers",
 * "tau-test", "majority-vote", "rate-kendall", "rate-spearman") and write
 * one coefficient per feature into `out`.
 *
 * # Safety
 * `handle` must be live; `method` NUL-terminated; `out` must point to
 * `fif_tensor_num_features(handle)` writable doubles.
 */
FifStatus fif_fuse(const struct FifTensor *handle,
                   const char *method,
                   double alpha,
                   double num_features,
                   double *out);

/**
 * Fuzzy summary of feature `index`: linguistic label ("low" | "moderate" |
 * "high") copied into `label_buf`, membership degree into `*degree`, and
 * the defuzzified coefficient into `*centroid`. The report is built on
 * first use and cached on the handle.
 *
 * # Safety
 * `handle` must be live and exclusively owned by the caller for the call;
 * `label_buf` must point to `label_cap` writable bytes; `degree` and
 * `centroid` must be valid or null (null skips that output).
 */
FifStatus fif_fuzzy_feature(struct FifTensor *handle,
                            uintptr_t index,
                            char *label_buf,
                            uintptr_t label_cap,
                            double *degree,
                            double *centroid);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FI_FUSE_H */
