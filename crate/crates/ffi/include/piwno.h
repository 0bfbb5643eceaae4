#ifndef PIWNO_H
#define PIWNO_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum PiwnoStatus {
  PIWNO_STATUS_OK = 0,
  PIWNO_STATUS_NULL_POINTER = 1,
  PIWNO_STATUS_INVALID_ARGUMENT = 2,
  PIWNO_STATUS_SHAPE_MISMATCH = 3,
  PIWNO_STATUS_IO = 4,
  PIWNO_STATUS_FORMAT = 5,
  PIWNO_STATUS_CONFIG = 6,
  PIWNO_STATUS_NUMERIC = 7,
  PIWNO_STATUS_PANIC = 8,
} PiwnoStatus;

// A loaded dataset container.
typedef struct PiwnoDataset PiwnoDataset;

// A loaded checkpoint.
typedef struct PiwnoModel PiwnoModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library on the same thread.
const char *piwno_last_error(void);

// Library version as a static string.
const char *piwno_version(void);

// Loads a checkpoint file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum PiwnoStatus piwno_model_load(const char *path, struct PiwnoModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from [`piwno_model_load`] and not be used afterwards.
void piwno_model_free(struct PiwnoModel *model);

// Problem name of the model (`burgers`, `nagumo`, `poisson`,
// `allen_cahn`) as a static string, or null for a null handle.
//
// # Safety
// `model` must be null or a live handle.
const char *piwno_model_problem(const struct PiwnoModel *model);

// Lengths of one raw input sample and one prediction.
//
// # Safety
// `model` must be a live handle; `input_len` and `output_len` writable.
enum PiwnoStatus piwno_model_shape(const struct PiwnoModel *model,
                                   size_t *input_len,
                                   size_t *output_len);

// Grid rows, columns and output channels of a prediction. Predictions are
// stored row-major as `[rows, cols, channels]`.
//
// # Safety
// `model` must be a live handle; the out pointers writable.
enum PiwnoStatus piwno_model_grid(const struct PiwnoModel *model,
                                  size_t *rows,
                                  size_t *cols,
                                  size_t *channels);

// Predicts the solution for one raw input sample.
//
// # Safety
// `input` must hold `input_len` doubles and `output` room for `output_len`.
enum PiwnoStatus piwno_model_predict(const struct PiwnoModel *model,
                                     const double *input,
                                     size_t input_len,
                                     double *output,
                                     size_t output_len);

// Mean and population standard deviation of the relative MSE of `model`
// over every sample of `dataset`, as ratios.
//
// # Safety
// Both handles must be live; `mean` and `std` writable.
enum PiwnoStatus piwno_model_evaluate(const struct PiwnoModel *model,
                                      const struct PiwnoDataset *dataset,
                                      double *mean,
                                      double *std);

// Loads a dataset container into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum PiwnoStatus piwno_dataset_load(const char *path, struct PiwnoDataset **out);

// Releases a dataset handle. Null is ignored.
//
// # Safety
// `dataset` must come from [`piwno_dataset_load`] and not be used afterwards.
void piwno_dataset_free(struct PiwnoDataset *dataset);

// Sample count, per-sample input and solution lengths, and whether
// solutions are stored (1) or not (0).
//
// # Safety
// `dataset` must be a live handle; the out pointers writable.
enum PiwnoStatus piwno_dataset_info(const struct PiwnoDataset *dataset,
                                    size_t *count,
                                    size_t *input_len,
                                    size_t *solution_len,
                                    int32_t *has_solutions);

// Copies input sample `index` into `out`.
//
// # Safety
// `dataset` must be a live handle and `out` hold `len` doubles.
enum PiwnoStatus piwno_dataset_input(const struct PiwnoDataset *dataset,
                                     size_t index,
                                     double *out,
                                     size_t len);

// Copies the solution of sample `index` into `out`.
//
// # Safety
// `dataset` must be a live handle and `out` hold `len` doubles.
enum PiwnoStatus piwno_dataset_solution(const struct PiwnoDataset *dataset,
                                        size_t index,
                                        double *out,
                                        size_t len);

// `‖pred − truth‖² / ‖truth‖²` over `len` values. Fails with
// `InvalidArgument` when `truth` is identically zero.
//
// # Safety
// `pred` and `truth` must hold `len` doubles; `out` must be writable.
enum PiwnoStatus piwno_relative_mse(const double *pred,
                                    const double *truth,
                                    size_t len,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIWNO_H */
