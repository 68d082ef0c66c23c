/* C API for the sigshell signature-verification pipeline. */

#ifndef SIGSHELL_H
#define SIGSHELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every API call.
typedef enum sigshell_status {
  SIGSHELL_STATUS_OK = 0,
  // A required pointer argument was null.
  SIGSHELL_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SIGSHELL_STATUS_INVALID_UTF8 = 2,
  // File system or decoding failure.
  SIGSHELL_STATUS_IO = 3,
  // The input data was rejected (no ink, wrong size, bad labels...).
  SIGSHELL_STATUS_DATA = 4,
  // The model cannot consume this input kind.
  SIGSHELL_STATUS_ARCH_MISMATCH = 5,
  // Unexpected internal failure.
  SIGSHELL_STATUS_INTERNAL = 6,
} sigshell_status;

// Pre-processed signature: 512x512 grayscale plus its ink mask.
typedef struct sigshell_image sigshell_image;

// A loaded embedding model.
typedef struct sigshell_model sigshell_model;

// Extracted shell features of one signature.
typedef struct sigshell_record sigshell_record;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *sigshell_last_error(void);

// Loads a PNG/PGM scan and runs the full pre-processing chain.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success `*out` owns a handle to free with
// [`sigshell_image_free`].
enum sigshell_status sigshell_image_load(const char *path, struct sigshell_image **out);

// Builds a handle from raw row-major 8-bit grayscale pixels and runs the
// pre-processing chain.
//
// # Safety
// `pixels` must point to `height * width` readable bytes; `out` must be
// valid.
enum sigshell_status sigshell_image_from_gray(const uint8_t *pixels,
                                              size_t height,
                                              size_t width,
                                              struct sigshell_image **out);

// Copies the 512x512 pre-processed grayscale into `out` (262144 bytes).
//
// # Safety
// `image` must be a live handle; `out` must hold 512*512 writable bytes.
enum sigshell_status sigshell_image_gray(const struct sigshell_image *image, uint8_t *out);

// # Safety
// `image` must be a pointer previously returned by this library and not
// yet freed (or null, which is a no-op).
void sigshell_image_free(struct sigshell_image *image);

// Runs shell extraction (pruning, ribbons, pressure, thickness) on a
// pre-processed image.
//
// # Safety
// `image` must be a live handle; `out` must be valid. On success `*out`
// owns a handle to free with [`sigshell_record_free`].
enum sigshell_status sigshell_extract(const struct sigshell_image *image,
                                      size_t hole_area,
                                      struct sigshell_record **out);

// Writes a record directory (shells/pressure/thickness/valid CSVs).
//
// # Safety
// `record` must be a live handle; `dir` a valid NUL-terminated string.
enum sigshell_status sigshell_record_save(const struct sigshell_record *record, const char *dir);

// Reads a record directory written by [`sigshell_record_save`].
//
// # Safety
// `dir` must be a valid NUL-terminated string; `out` must be valid.
enum sigshell_status sigshell_record_load(const char *dir, struct sigshell_record **out);

// Copies the six contour functions into `out` as 6*512 u16 values
// (row-major: S1, I1, S2, I2, resS, resI). Invalid columns hold 0.
//
// # Safety
// `record` must be a live handle; `out` must hold 6*512 writable u16.
enum sigshell_status sigshell_record_shells(const struct sigshell_record *record, uint16_t *out);

// Copies the pseudo-pressure map into `out` as 6*11*512 bytes
// (shell-major, offset-minor).
//
// # Safety
// `record` must be a live handle; `out` must hold 6*11*512 writable bytes.
enum sigshell_status sigshell_record_pressure(const struct sigshell_record *record, uint8_t *out);

// Copies the thickness vectors into `out` as 2*512 u16 (superior row
// first).
//
// # Safety
// `record` must be a live handle; `out` must hold 2*512 writable u16.
enum sigshell_status sigshell_record_thickness(const struct sigshell_record *record, uint16_t *out);

// # Safety
// `record` must be a pointer previously returned by this library and not
// yet freed (or null, which is a no-op).
void sigshell_record_free(struct sigshell_record *record);

// Loads a trained checkpoint.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid. On
// success `*out` owns a handle to free with [`sigshell_model_free`].
enum sigshell_status sigshell_model_load(const char *path, struct sigshell_model **out);

// Embedding length produced by this model (0 for a null handle).
//
// # Safety
// `model` must be a live handle or null.
size_t sigshell_model_embedding_dim(const struct sigshell_model *model);

// Embeds one shell record (shell-based architectures). `out` receives
// `embedding_dim` doubles.
//
// # Safety
// `model` and `record` must be live handles; `out` must hold
// `sigshell_model_embedding_dim(model)` writable doubles.
enum sigshell_status sigshell_embed_record(struct sigshell_model *model,
                                           const struct sigshell_record *record,
                                           double *out);

// # Safety
// `model` must be a pointer previously returned by this library and not
// yet freed (or null, which is a no-op).
void sigshell_model_free(struct sigshell_model *model);

// Euclidean distance between two embeddings. Returns a negative value on
// bad arguments.
//
// # Safety
// `a` and `b` must point to `dim` readable doubles.
double sigshell_distance_euclidean(const double *a, const double *b, size_t dim);

// Area under the ROC curve for distances scored against {0,1} labels
// (1 = forged; larger distance = more forged).
//
// # Safety
// `distances` and `labels` must point to `n` readable elements; `out`
// must be valid.
enum sigshell_status sigshell_auc(const double *distances,
                                  const uint8_t *labels,
                                  size_t n,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGSHELL_H */
