#ifndef FLEXCURVE_H
#define FLEXCURVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_INVALID = 1,
  FC_STATUS_DOMAIN = 2,
  FC_STATUS_RANGE = 3,
  FC_STATUS_UNSUPPORTED = 4,
  FC_STATUS_NULL_POINTER = 5,
  FC_STATUS_PARSE = 6,
  FC_STATUS_NOT_FOUND = 7,
  FC_STATUS_PANIC = 8,
} FcStatus;

typedef enum FcClassification {
  FC_CLASSIFICATION_X_STRICTLY_DOMINATES = 0,
  FC_CLASSIFICATION_X_DOMINATES = 1,
  FC_CLASSIFICATION_Y_STRICTLY_DOMINATES = 2,
  FC_CLASSIFICATION_Y_DOMINATES = 3,
  FC_CLASSIFICATION_X_MORE_FLEXIBLE = 4,
  FC_CLASSIFICATION_X_STRICTLY_MORE_FLEXIBLE = 5,
  FC_CLASSIFICATION_Y_MORE_FLEXIBLE = 6,
  FC_CLASSIFICATION_Y_STRICTLY_MORE_FLEXIBLE = 7,
  FC_CLASSIFICATION_EQUALLY_FLEXIBLE = 8,
  FC_CLASSIFICATION_INCOMPARABLE = 9,
} FcClassification;

typedef enum FcTailRelation {
  FC_TAIL_RELATION_NONE = 0,
  FC_TAIL_RELATION_X_ABOVE = 1,
  FC_TAIL_RELATION_Y_ABOVE = 2,
  FC_TAIL_RELATION_EQUAL = 3,
} FcTailRelation;

// Opaque parsed model document.
typedef struct FcModel FcModel;

// Opaque prospect handle.
typedef struct FcProspect FcProspect;

typedef struct FcStats {
  double mean;
  double variance;
  double worst_case;
} FcStats;

// Summary of a flexibility comparison.
typedef struct FcVerdict {
  enum FcClassification classification;
  // NaN when there is no threshold.
  double threshold_k;
  enum FcTailRelation tail_relation;
  // NaN when `tail_relation` is `FC_TAIL_RELATION_NONE`.
  double certified_from;
  // Total crossings found, which may exceed the caller's buffer.
  size_t n_crossings;
} FcVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `cap`). Returns the full message length
// excluding the terminator.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t fc_last_error_message(char *buf, size_t cap);

// Discrete prospect from `len` (value, mass) pairs.
//
// # Safety
// `values` and `masses` must point to `len` readable doubles; `out` must be
// writable.
enum FcStatus fc_prospect_discrete(const double *values,
                                   const double *masses,
                                   size_t len,
                                   struct FcProspect **out);

// # Safety
// `out` must be writable.
enum FcStatus fc_prospect_gaussian(double mean, double variance, struct FcProspect **out);

// # Safety
// `out` must be writable.
enum FcStatus fc_prospect_deterministic(double value, struct FcProspect **out);

// New handle for `k·X` with `k > 0`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_prospect_scale(const struct FcProspect *p, double k, struct FcProspect **out);

// New handle for `X + c`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_prospect_shift(const struct FcProspect *p, double c, struct FcProspect **out);

// New handle for the sum of independent `a` and `b`.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum FcStatus fc_prospect_add_independent(const struct FcProspect *a,
                                          const struct FcProspect *b,
                                          struct FcProspect **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `p` must be null or a handle not yet freed.
void fc_prospect_free(struct FcProspect *p);

// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_prospect_stats(const struct FcProspect *p, struct FcStats *out);

// `ln E[e^{tX}]`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_prospect_log_mgf(const struct FcProspect *p, double t, double *out);

// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_certain_equivalent(const struct FcProspect *p, double r, double *out);

// `E[X] - r·Var[X]/2`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum FcStatus fc_mean_variance(const struct FcProspect *p, double r, double *out);

// Writes `CE(X|k_i·r)` into `out_ce[i]` for each of the `n` ascending `ks`.
//
// # Safety
// `p` must be a live handle; `ks` and `out_ce` must hold `n` doubles.
enum FcStatus fc_flexibility_curve(const struct FcProspect *p,
                                   double r,
                                   const double *ks,
                                   size_t n,
                                   double *out_ce);

// Smallest `K ≥ 1` beyond which `CE(X|k·r) ≥ CE(Y|k·r)`. `*found` is false
// when `X` ends up below `Y`, and `*out_k` is then NaN.
//
// # Safety
// `x`, `y` must be live handles; `out_k` and `found` must be writable.
enum FcStatus fc_find_threshold(const struct FcProspect *x,
                                const struct FcProspect *y,
                                double r,
                                double *out_k,
                                bool *found);

// Classifies `(X, Y)`. Up to `cap` crossing points go to `crossings`;
// `out->n_crossings` reports how many exist.
//
// # Safety
// `x`, `y` must be live handles; `out` must be writable; `crossings` must be
// null (with `cap == 0`) or hold `cap` doubles.
enum FcStatus fc_compare(const struct FcProspect *x,
                         const struct FcProspect *y,
                         double r,
                         struct FcVerdict *out,
                         double *crossings,
                         size_t cap);

// Parses a NUL-terminated JSON model document.
//
// # Safety
// `json` must be a valid C string; `out` must be writable.
enum FcStatus fc_model_parse(const char *json, struct FcModel **out);

// # Safety
// `m` must be null or a model not yet freed.
void fc_model_free(struct FcModel *m);

// New handle holding a copy of the model's prospect `id`.
//
// # Safety
// `m` must be a live model; `id` a valid C string; `out` writable.
enum FcStatus fc_model_prospect(const struct FcModel *m, const char *id, struct FcProspect **out);

// Root certain equivalent of the model's decision tree at aversion `r`.
//
// # Safety
// `m` must be a live model; `out_ce` must be writable.
enum FcStatus fc_model_rollback(const struct FcModel *m, double r, double *out_ce);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLEXCURVE_H */
