#ifndef CALPARITY_H
#define CALPARITY_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpFeasibilityReason {
  CP_FEASIBILITY_REASON_OK = 0,
  CP_FEASIBILITY_REASON_COST_ORDER_VIOLATED = 1,
  CP_FEASIBILITY_REASON_EXCEEDS_TRIVIAL = 2,
} CpFeasibilityReason;

typedef enum CpStatus {
  CP_STATUS_OK = 0,
  CP_STATUS_NULL_POINTER = 1,
  CP_STATUS_INVALID_ARGUMENT = 2,
  CP_STATUS_INFEASIBLE = 3,
  CP_STATUS_ALREADY_TRIVIAL = 4,
  CP_STATUS_IO = 5,
  CP_STATUS_PARSE = 6,
  CP_STATUS_BUFFER_TOO_SMALL = 7,
  CP_STATUS_PANIC = 8,
} CpStatus;

// Groups loaded from a CSV file, in order of first appearance.
typedef struct CpDataset CpDataset;

// One group of scored, labelled samples.
typedef struct CpGroup CpGroup;

typedef struct CpRatePoint {
  double c_fp;
  double c_fn;
} CpRatePoint;

// Cost `a * c_fp + b * c_fn`.
typedef struct CpCostSpec {
  double a;
  double b;
} CpCostSpec;

typedef struct CpFeasibility {
  bool feasible;
  double g1_cost;
  double g2_cost;
  double trivial2_cost;
  enum CpFeasibilityReason reason;
} CpFeasibility;

// Result of [`cp_plan_withholding`]. The plan fields are meaningful only
// when `has_plan` is true.
typedef struct CpWithholding {
  struct CpFeasibility feasibility;
  bool has_plan;
  double alpha;
  double trivial_output;
  struct CpRatePoint post_rates;
  double post_cost;
} CpWithholding;

typedef struct CpFlipRates {
  double q_n2p;
  double q_p2n;
} CpFlipRates;

typedef struct CpEoSolution {
  struct CpFlipRates group1;
  struct CpFlipRates group2;
  struct CpRatePoint rates1;
  struct CpRatePoint rates2;
  double objective;
} CpEoSolution;

typedef struct CpCostPair {
  struct CpCostSpec group1;
  struct CpCostSpec group2;
} CpCostPair;

typedef struct CpBound {
  double m;
  uint64_t d;
  double l;
  double delta_cal;
  double delta_cost;
  double rate_bound;
} CpBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *cp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *cp_version(void);

// Builds a group from parallel score and label arrays of length `len`.
//
// # Safety
// `id` must be a NUL-terminated string; `scores` and `labels` must point to
// `len` readable elements; `out` must be writable.
enum CpStatus cp_group_new(const char *id,
                           const double *scores,
                           const uint8_t *labels,
                           size_t len,
                           struct CpGroup **out);

// # Safety
// `group` must be null or a handle from this library not yet freed.
void cp_group_free(struct CpGroup *group);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `group` must be null or a live handle.
size_t cp_group_len(const struct CpGroup *group);

// # Safety
// `group` must be a live handle and `out` writable.
enum CpStatus cp_group_base_rate(const struct CpGroup *group, double *out);

// # Safety
// `group` must be a live handle and `out` writable.
enum CpStatus cp_group_rate_point(const struct CpGroup *group, struct CpRatePoint *out);

// Calibration gap with one bin per distinct score.
//
// # Safety
// `group` must be a live handle and `out` writable.
enum CpStatus cp_group_calibration_gap(const struct CpGroup *group, double *out);

// Loads a `group,score,label` CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum CpStatus cp_dataset_load_csv(const char *path, struct CpDataset **out);

// # Safety
// `dataset` must be null or a live handle.
void cp_dataset_free(struct CpDataset *dataset);

// Number of groups, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t cp_dataset_len(const struct CpDataset *dataset);

// Copies group `index` into a new handle owned by the caller.
//
// # Safety
// `dataset` must be a live handle and `out` writable.
enum CpStatus cp_dataset_group(const struct CpDataset *dataset, size_t index, struct CpGroup **out);

// Cost of the constant classifier that always outputs `mu`.
//
// # Safety
// `out` must be writable.
enum CpStatus cp_trivial_cost(double mu, struct CpCostSpec spec_, double *out);

// # Safety
// `out` must be writable.
enum CpStatus cp_feasibility(double g1_cost,
                             double g2_cost,
                             double trivial2_cost,
                             struct CpFeasibility *out);

// Interpolation weight that raises group 2's cost to `g1_cost`.
// Returns `Infeasible` or `AlreadyTrivial` when it does not exist.
//
// # Safety
// `out` must be writable.
enum CpStatus cp_compute_alpha(double g1_cost, double g2_cost, double trivial2_cost, double *out);

// Plans withholding for group 2 so that its cost matches group 1's.
// An infeasible instance is not an error: `has_plan` is false and the
// verdict says why.
//
// # Safety
// `h1` and `h2` must be live handles and `out` writable.
enum CpStatus cp_plan_withholding(const struct CpGroup *h1,
                                  struct CpCostSpec spec1,
                                  const struct CpGroup *h2,
                                  struct CpCostSpec spec2,
                                  struct CpWithholding *out);

// Expected rates after withholding with probability `alpha`.
//
// # Safety
// `group` must be a live handle and `out` writable.
enum CpStatus cp_mixture_rate_point(const struct CpGroup *group,
                                    double alpha,
                                    struct CpRatePoint *out);

// Calibration gap of the withholding mixture.
//
// # Safety
// `group` must be a live handle and `out` writable.
enum CpStatus cp_mixture_calibration_gap(const struct CpGroup *group, double alpha, double *out);

// Withholds each sample independently with probability `alpha`. Writes
// 1 (withheld) or 0 into `mask`, which must hold `cp_group_len(group)`
// bytes. If `out` is non-null it receives the realized group.
//
// # Safety
// `group` must be a live handle; `mask` must point to `mask_len` writable
// bytes; `out` must be null or writable.
enum CpStatus cp_apply_monte_carlo(const struct CpGroup *group,
                                   double alpha,
                                   uint64_t seed,
                                   uint8_t *mask,
                                   size_t mask_len,
                                   struct CpGroup **out);

// Equalized Odds flip probabilities minimizing the summed thresholded loss.
// Returns `Infeasible` if no flips equalize the rates.
//
// # Safety
// `g1` and `g2` must be live handles and `out` writable.
enum CpStatus cp_solve_eo(const struct CpGroup *g1,
                          const struct CpGroup *g2,
                          struct CpEoSolution *out);

// Uniform rate bound implied by approximate calibration and two
// approximately equal costs. `m` and `d` bound the magnitude and common
// denominator of the constraint matrix entries.
//
// # Safety
// `out` must be writable.
enum CpStatus cp_approximate_bound(double mu1,
                                   double mu2,
                                   struct CpCostPair cost,
                                   struct CpCostPair cost_prime,
                                   double delta_cal,
                                   double delta_cost,
                                   double m,
                                   uint64_t d,
                                   struct CpBound *out);

// FP/FN-plane scene for two groups as a JSON string. Release it with
// [`cp_string_free`].
//
// # Safety
// `g1` and `g2` must be live handles and `out` writable.
enum CpStatus cp_scene_json(const struct CpGroup *g1,
                            const struct CpGroup *g2,
                            struct CpCostPair cost,
                            char **out);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void cp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CALPARITY_H */
