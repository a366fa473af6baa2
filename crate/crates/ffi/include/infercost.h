#ifndef INFERCOST_H
#define INFERCOST_H

#pragma once

#include <stdint.h>
#include <stddef.h>
#include <stdbool.h>

#define INFERCOST_ALGO_SVM 0

#define INFERCOST_ALGO_KNN 1

#define INFERCOST_ALGO_RF 2

#define INFERCOST_ALGO_NN 3

#define INFERCOST_TYPE_TABULAR 0

#define INFERCOST_TYPE_TEXT 1

#define INFERCOST_TYPE_IMAGE 2

#define INFERCOST_TARGET_LATENCY 0

#define INFERCOST_TARGET_ENERGY 1

// Length of a design row in the numeric data-type encoding.
#define INFERCOST_DESIGN_WIDTH 12

typedef enum InfercostStatus {
  INFERCOST_STATUS_OK = 0,
  INFERCOST_STATUS_NULL_ARGUMENT = 1,
  INFERCOST_STATUS_INVALID_ARGUMENT = 2,
  // The fit had too few records or collinear columns.
  INFERCOST_STATUS_FIT_FAILED = 3,
  INFERCOST_STATUS_IO = 4,
  INFERCOST_STATUS_RUNTIME = 5,
  INFERCOST_STATUS_PANIC = 6,
  INFERCOST_STATUS_BUFFER_TOO_SMALL = 7,
} InfercostStatus;

// A synthetic dataset.
typedef struct InfercostDataset InfercostDataset;

// A fitted latency or energy equation.
typedef struct InfercostEquation InfercostEquation;

// A trained classifier.
typedef struct InfercostModel InfercostModel;

// Inputs of one equation evaluation.
typedef struct InfercostInputs {
  // One of the `INFERCOST_ALGO_*` constants.
  uint32_t algorithm;
  uint64_t n;
  uint64_t p;
  // One of the `INFERCOST_TYPE_*` constants.
  uint32_t data_type;
  // Intensities for explainability, fairness, interpretability, safety
  // and privacy, each in [0, 1].
  double guardrails[5];
} InfercostInputs;

typedef struct InfercostPointPrediction {
  double point;
  double lower;
  double upper;
} InfercostPointPrediction;

typedef struct InfercostClassification {
  uint8_t label;
  double score;
  // Predict calls made by guardrails beyond the base prediction.
  uint64_t extra_predict_calls;
} InfercostClassification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated, into
// `buf` and returns the full message length excluding the NUL. A message
// longer than `len - 1` bytes is truncated. Returns 0 when no error has
// been recorded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t infercost_last_error(char *buf, uintptr_t len);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void infercost_string_free(char *s);

// Writes the 12-component numeric-encoding design row for `inputs`.
//
// # Safety
// `inputs` must point to a valid struct and `out` to 12 writable doubles.
enum InfercostStatus infercost_design_row(const struct InfercostInputs *inputs,
                                          uint32_t target_code,
                                          double *out);

// Parses an equation from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum InfercostStatus infercost_equation_from_json(const char *json, struct InfercostEquation **out);

// Fits an equation to a records CSV. `drop_constant` fixes columns that
// never vary in the records at zero.
//
// # Safety
// `records_path` must be a NUL-terminated string and `out` a writable pointer.
enum InfercostStatus infercost_equation_fit_csv(const char *records_path,
                                                uint32_t target_code,
                                                bool drop_constant,
                                                struct InfercostEquation **out);

// Serialises an equation to JSON. Release the string with
// [`infercost_string_free`].
//
// # Safety
// `eq` must be a live handle and `out` a writable pointer.
enum InfercostStatus infercost_equation_to_json(const struct InfercostEquation *eq, char **out);

// Point prediction with its `± 2 sigma` interval.
//
// # Safety
// `eq` must be a live handle, `inputs` valid and `out` writable.
enum InfercostStatus infercost_equation_predict(const struct InfercostEquation *eq,
                                                const struct InfercostInputs *inputs,
                                                struct InfercostPointPrediction *out);

// Copies the coefficients into `buf` and stores their count in `count`.
// With a null `buf` only the count is written.
//
// # Safety
// `eq` must be a live handle, `count` writable and `buf` null or `len` doubles.
enum InfercostStatus infercost_equation_coefficients(const struct InfercostEquation *eq,
                                                     double *buf,
                                                     uintptr_t len,
                                                     uintptr_t *count);

// Residual standard deviation of the fit.
//
// # Safety
// `eq` must be null or a live handle.
double infercost_equation_sigma(const struct InfercostEquation *eq);

// # Safety
// `eq` must be null or a handle from this library, not yet freed.
void infercost_equation_free(struct InfercostEquation *eq);

// Generates a two-class Gaussian dataset.
//
// # Safety
// `out` must be a writable pointer.
enum InfercostStatus infercost_dataset_generate(uintptr_t n,
                                                uintptr_t p,
                                                uint32_t data_type_code,
                                                double separation,
                                                uint64_t seed,
                                                struct InfercostDataset **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
uintptr_t infercost_dataset_rows(const struct InfercostDataset *ds);

// Copies row `index` into `buf`, which must hold `p` doubles.
//
// # Safety
// `ds` must be a live handle and `buf` null or `len` writable doubles.
enum InfercostStatus infercost_dataset_row(const struct InfercostDataset *ds,
                                           uintptr_t index,
                                           double *buf,
                                           uintptr_t len);

// # Safety
// `ds` must be null or a handle from this library, not yet freed.
void infercost_dataset_free(struct InfercostDataset *ds);

// Trains a classifier with default hyperparameters.
//
// # Safety
// `ds` must be a live handle and `out` a writable pointer.
enum InfercostStatus infercost_model_train(uint32_t algorithm_code,
                                           const struct InfercostDataset *ds,
                                           uint64_t seed,
                                           struct InfercostModel **out);

// Classifies one sample with the given guardrail intensities applied.
// `guardrails` may be null for a bare prediction. Each call uses a fresh
// fairness window.
//
// # Safety
// `model` must be a live handle, `features` point to `len` doubles,
// `guardrails` be null or point to 5 doubles and `out` be writable.
enum InfercostStatus infercost_model_predict(const struct InfercostModel *model,
                                             const double *features,
                                             uintptr_t len,
                                             uint8_t group,
                                             const double *guardrails,
                                             uint64_t seed,
                                             struct InfercostClassification *out);

// Number of input features the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t infercost_model_input_dim(const struct InfercostModel *model);

// # Safety
// `model` must be null or a handle from this library, not yet freed.
void infercost_model_free(struct InfercostModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INFERCOST_H */
