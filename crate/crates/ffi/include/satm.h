#ifndef SATM_H
#define SATM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SatmStatus {
  SATM_STATUS_OK = 0,
  // A required pointer argument was null.
  SATM_STATUS_NULL_ARGUMENT = 1,
  // Bad argument value, configuration or crop/translation range.
  SATM_STATUS_INVALID_ARGUMENT = 2,
  // Malformed, truncated or unreadable input.
  SATM_STATUS_DATA = 3,
  // Non-finite values during computation.
  SATM_STATUS_NUMERICAL = 4,
  // A Rust panic was caught at the boundary.
  SATM_STATUS_INTERNAL = 5,
} SatmStatus;

// A loaded chip.
typedef struct SatmChip SatmChip;

// A trained network with its normalization and class list.
typedef struct SatmModel SatmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *satm_version(void);

// Message of the most recent failure on this thread, or null if none.
// The pointer is valid until the next failing call on this thread.
const char *satm_last_error(void);

// Loads a SARC or Phoenix chip file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SatmStatus satm_chip_load(const char *path, struct SatmChip **out);

// # Safety
// `chip` must be null or a handle from [`satm_chip_load`] not yet freed.
void satm_chip_free(struct SatmChip *chip);

// # Safety
// `chip` must be a live handle.
uintptr_t satm_chip_rows(const struct SatmChip *chip);

// # Safety
// `chip` must be a live handle.
uintptr_t satm_chip_cols(const struct SatmChip *chip);

// Row-major magnitudes, `rows * cols` values, owned by the handle.
//
// # Safety
// `chip` must be a live handle.
const float *satm_chip_pixels(const struct SatmChip *chip);

// Loads a checkpoint ready for inference.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SatmStatus satm_model_load(const char *path, struct SatmModel **out);

// # Safety
// `model` must be null or a handle from [`satm_model_load`] not yet freed.
void satm_model_free(struct SatmModel *model);

// # Safety
// `model` must be a live handle.
uintptr_t satm_model_num_classes(const struct SatmModel *model);

// Side of the square crop the network consumes.
//
// # Safety
// `model` must be a live handle.
uintptr_t satm_model_crop_size(const struct SatmModel *model);

// Name of class `index`, or null when out of range. Owned by the handle.
//
// # Safety
// `model` must be a live handle.
const char *satm_model_class_name(const struct SatmModel *model, uintptr_t index);

// Classifies the crop of a raw chip displaced by `(dx, dy)` from its
// center; `(0, 0)` is the center crop. Writes the class index to `label`.
//
// # Safety
// `model` must be a live handle, `pixels` must point to `rows * cols`
// floats and `label` must be a valid pointer.
enum SatmStatus satm_model_classify(const struct SatmModel *model,
                                    const float *pixels,
                                    uintptr_t rows,
                                    uintptr_t cols,
                                    int64_t dx,
                                    int64_t dy,
                                    uintptr_t *label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATM_H */
