#ifndef FAIRTRS_H
#define FAIRTRS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible function.
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_POINTER = 1,
  FT_STATUS_INVALID_ARGUMENT = 2,
  FT_STATUS_INVALID_UTF8 = 3,
  FT_STATUS_PARSE_ERROR = 4,
  FT_STATUS_DIMENSION_MISMATCH = 5,
  FT_STATUS_SOLVER_FAILURE = 6,
  FT_STATUS_PANIC = 7,
} FtStatus;

// Opaque dataset handle.
typedef struct FtDataset FtDataset;

// Opaque model handle.
typedef struct FtModel FtModel;

// Group-fairness gaps; an undefined gap (empty conditioning group) is NaN.
typedef struct FtFairnessReport {
  double independence;
  double separation_y0;
  double separation_y1;
  double sufficiency_yhat0;
  double sufficiency_yhat1;
} FtFairnessReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or NULL.
//
// The pointer stays valid until the next failing call on this thread.
const char *ft_last_error_message(void);

void ft_clear_error(void);

// Generates the synthetic two-group dataset. `params_json` may be NULL for
// defaults.
//
// # Safety
// `params_json` must be NULL or a NUL-terminated string; `out` must be
// writable.
enum FtStatus ft_dataset_generate_unfair2d(const char *params_json, struct FtDataset **out);

// Builds a dataset from a row-major `m x n` feature matrix in `[0, 1]`.
//
// # Safety
// `features` must hold `m * n` values; `labels` and `sensitive` must hold
// `m` values each; `out` must be writable.
enum FtStatus ft_dataset_from_arrays(const double *features,
                                     size_t m,
                                     size_t n,
                                     const uint8_t *labels,
                                     const uint8_t *sensitive,
                                     struct FtDataset **out);

// Number of rows, or 0 for NULL.
//
// # Safety
// `d` must be NULL or a live dataset handle.
size_t ft_dataset_len(const struct FtDataset *d);

// Number of features, or 0 for NULL.
//
// # Safety
// `d` must be NULL or a live dataset handle.
size_t ft_dataset_n_features(const struct FtDataset *d);

// # Safety
// `d` must be NULL or a handle not yet freed.
void ft_dataset_free(struct FtDataset *d);

// Creates a model from explicit parameters.
//
// # Safety
// `weights` must hold `n` values; `out` must be writable.
enum FtStatus ft_model_new(const double *weights, size_t n, double bias, struct FtModel **out);

// Trains a model. `config_json` is a training config object (NULL for
// defaults).
//
// # Safety
// `d` must be a live dataset handle; `config_json` NULL or NUL-terminated;
// `out` writable.
enum FtStatus ft_train(const struct FtDataset *d, const char *config_json, struct FtModel **out);

// Number of weights, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live model handle.
size_t ft_model_n_features(const struct FtModel *m);

// Copies the weights into `out` (capacity `len`) and the bias into `bias`.
//
// # Safety
// `m` must be a live model handle; `out` must hold `len` values; `bias`
// NULL or writable.
enum FtStatus ft_model_params(const struct FtModel *m, double *out, size_t len, double *bias);

// # Safety
// `m` must be NULL or a handle not yet freed.
void ft_model_free(struct FtModel *m);

// Accuracy at `threshold`; predictions are written to `preds` when it is
// not NULL (capacity must equal the dataset length).
//
// # Safety
// Handles must be live; `accuracy` writable; `preds` NULL or holding
// `ft_dataset_len(d)` bytes.
enum FtStatus ft_evaluate(const struct FtModel *m,
                          const struct FtDataset *d,
                          double threshold,
                          double *accuracy,
                          uint8_t *preds);

// Solves the trust-region subproblem for gradient `grad` (length `n`) and
// row-major symmetric Hessian `hess` (`n * n`). A nonpositive `tol` uses
// the default.
//
// # Safety
// Arrays must hold the stated lengths; `delta_out` must hold `n` values;
// `lambda_out` NULL or writable.
enum FtStatus ft_trs_solve(const double *grad,
                           const double *hess,
                           size_t n,
                           double radius,
                           double tol,
                           double *delta_out,
                           double *lambda_out);

// Fairness gaps of binary predictions against labels and a binary
// sensitive attribute, all of length `len`.
//
// # Safety
// Arrays must hold `len` bytes; `out` must be writable.
enum FtStatus ft_fairness_report(const uint8_t *preds,
                                 const uint8_t *labels,
                                 const uint8_t *sensitive,
                                 size_t len,
                                 struct FtFairnessReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRTRS_H */
