#ifndef RIDGELIFT_H
#define RIDGELIFT_H

/* Generated by cbindgen from ridgelift-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every function in this ABI.
 */
typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_DOMAIN_ERROR = 3,
  RL_STATUS_SHAPE_ERROR = 4,
  RL_STATUS_DEGENERATE = 5,
  RL_STATUS_NON_CONVERGENCE = 6,
  RL_STATUS_BUDGET_EXCEEDED = 7,
  RL_STATUS_SEARCH_EXHAUSTED = 8,
  RL_STATUS_INFEASIBLE = 9,
  RL_STATUS_PARSE_ERROR = 10,
  RL_STATUS_IO_ERROR = 11,
  RL_STATUS_PANIC = 12,
} RlStatus;

/**
 * Opaque recovered-estimate handle.
 */
typedef struct RlEstimate RlEstimate;

/**
 * Opaque measurement vector handle.
 */
typedef struct RlMeasurements RlMeasurements;

/**
 * Opaque ground-truth model handle.
 */
typedef struct RlModel RlModel;

/**
 * Opaque sampling plan handle.
 */
typedef struct RlPlan RlPlan;

/**
 * Inputs for `rl_compute_bounds`.
 */
typedef struct RlBoundsInputs {
  uint64_t d;
  uint64_t k;
  uint64_t m_x;
  uint64_t m_phi;
  double epsilon;
  double c2;
  double alpha;
  double rho;
  double kappa;
  double c0;
  double eta;
  double delta;
  double p1;
  double p2;
  double sigma;
  double gamma;
} RlBoundsInputs;

/**
 * Outputs of `rl_compute_bounds`.
 */
typedef struct RlBoundsReport {
  double q_kappa;
  double u_kappa;
  double noise_bound;
  double lambda_deterministic;
  double lambda_gaussian;
  double lambda;
  double tau_sq;
  double epsilon_ceiling;
  double epsilon_ceiling_eta;
  double epsilon_ceiling_delta;
  double alignment_floor;
  uint64_t m_x_min;
  uint64_t m_phi_min;
  double success_probability;
  /**
   * 1 when m_phi < m_x * d holds.
   */
  uint8_t lemma4_precondition_ok;
} RlBoundsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (truncated, NUL-terminated);
 * returns the full message length in bytes.
 */
uintptr_t rl_last_error_message(char *buf, uintptr_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

/**
 * Logistic model f(x) = 1/(1 + exp(-a^T x)) with a Haar-random unit row.
 *
 * # Safety
 * `out` must be a valid pointer; the returned handle must be released with
 * `rl_model_free`.
 */
enum RlStatus rl_model_logistic(uint64_t d, uint64_t seed, struct RlModel **out);

/**
 * Quadratic-form model f(x) = ||Ax - b||^2; `offset` may be null for b = 0.
 *
 * # Safety
 * `offset`, when non-null, must point to `k` doubles; `out` must be valid.
 */
enum RlStatus rl_model_quadratic(uint64_t d,
                                 uint64_t k,
                                 const double *offset,
                                 uint64_t seed,
                                 struct RlModel **out);

/**
 * Additive Gaussian-atom model with per-atom widths and offsets.
 *
 * # Safety
 * `sigmas` and `offsets` must point to `k` doubles; `out` must be valid.
 */
enum RlStatus rl_model_sum_gaussians(uint64_t d,
                                     uint64_t k,
                                     const double *sigmas,
                                     const double *offsets,
                                     uint64_t seed,
                                     struct RlModel **out);

/**
 * # Safety
 * `model` must come from a model constructor and not be freed twice.
 */
void rl_model_free(struct RlModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out_d`/`out_k` must be valid pointers.
 */
enum RlStatus rl_model_dims(const struct RlModel *model, uint64_t *out_d, uint64_t *out_k);

/**
 * Noise-free f(x); `x` must hold `d` doubles.
 *
 * # Safety
 * `model` live; `x` points to `x_len` doubles; `out` valid.
 */
enum RlStatus rl_model_value(const struct RlModel *model,
                             const double *x,
                             uint64_t x_len,
                             double *out);

/**
 * Smoothness constant C2 recorded for the model's link.
 *
 * # Safety
 * `model` live; `out` valid.
 */
enum RlStatus rl_model_c2(const struct RlModel *model, double *out);

/**
 * Dense sampling plan: m_x centers on the sphere, m_phi Rademacher
 * directions per center.
 *
 * # Safety
 * `out` must be valid; release with `rl_plan_free`.
 */
enum RlStatus rl_plan_dense(uint64_t d,
                            uint64_t k,
                            uint64_t m_x,
                            uint64_t m_phi,
                            double epsilon,
                            uint64_t seed,
                            struct RlPlan **out);

/**
 * Subset-selection plan sampling `fill` of the (i, j) grid.
 *
 * # Safety
 * `out` must be valid; release with `rl_plan_free`.
 */
enum RlStatus rl_plan_subset(uint64_t d,
                             uint64_t k,
                             uint64_t m_x,
                             uint64_t m_phi,
                             double epsilon,
                             double fill,
                             uint64_t seed,
                             struct RlPlan **out);

/**
 * # Safety
 * `plan` must come from a plan constructor and not be freed twice.
 */
void rl_plan_free(struct RlPlan *plan);

/**
 * Number of measurements the plan produces (m_phi dense, |Omega| subset).
 *
 * # Safety
 * `plan` live; `out` valid.
 */
enum RlStatus rl_plan_measurement_len(const struct RlPlan *plan, uint64_t *out);

/**
 * eps_bar = epsilon sqrt(d/m_phi), the domain enlargement.
 *
 * # Safety
 * `plan` live; `out` valid.
 */
enum RlStatus rl_plan_enlarged_radius(const struct RlPlan *plan, double *out);

/**
 * Assemble finite-difference measurements of the model under the plan,
 * with optional Gaussian and sparse oracle noise.
 *
 * # Safety
 * `model` and `plan` live; `out` valid; release with
 * `rl_measurements_free`.
 */
enum RlStatus rl_measure(const struct RlModel *model,
                         const struct RlPlan *plan,
                         double gaussian_sigma,
                         double sparse_prob,
                         double sparse_sigma,
                         uint64_t noise_seed,
                         struct RlMeasurements **out);

/**
 * # Safety
 * `ms` must come from `rl_measure` and not be freed twice.
 */
void rl_measurements_free(struct RlMeasurements *ms);

/**
 * # Safety
 * `ms` live; `out` valid.
 */
enum RlStatus rl_measurements_len(const struct RlMeasurements *ms, uint64_t *out);

/**
 * # Safety
 * `ms` live; `out` valid.
 */
enum RlStatus rl_measurements_oracle_calls(const struct RlMeasurements *ms, uint64_t *out);

/**
 * Copy the measurement vector into `buf` (`cap` doubles); fails on a
 * too-small buffer.
 *
 * # Safety
 * `ms` live; `buf` points to `cap` writable doubles.
 */
enum RlStatus rl_measurements_copy(const struct RlMeasurements *ms, double *buf, uint64_t cap);

/**
 * Rank-projected gradient recovery (adaptive step).
 *
 * # Safety
 * `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
 */
enum RlStatus rl_recover_rank_projected(const struct RlPlan *plan,
                                        const struct RlMeasurements *ms,
                                        uint64_t target_rank,
                                        uint64_t max_iter,
                                        double tol,
                                        uint64_t seed,
                                        struct RlEstimate **out);

/**
 * Nuclear-norm solver targeting the Dantzig feasibility radius `lambda`.
 *
 * # Safety
 * `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
 */
enum RlStatus rl_recover_nuclear(const struct RlPlan *plan,
                                 const struct RlMeasurements *ms,
                                 uint64_t target_rank,
                                 double lambda,
                                 uint64_t max_iter,
                                 double tol,
                                 uint64_t seed,
                                 struct RlEstimate **out);

/**
 * Sparse + low-rank recovery for subset measurements with up to
 * `sparsity` corrupted entries.
 *
 * # Safety
 * `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
 */
enum RlStatus rl_recover_sparse_low_rank(const struct RlPlan *plan,
                                         const struct RlMeasurements *ms,
                                         uint64_t target_rank,
                                         uint64_t sparsity,
                                         uint64_t max_iter,
                                         double tol,
                                         uint64_t seed,
                                         struct RlEstimate **out);

/**
 * # Safety
 * `est` must come from a recovery call and not be freed twice.
 */
void rl_estimate_free(struct RlEstimate *est);

/**
 * # Safety
 * `est` live; `out_iterations`, `out_residual`, `out_feasible` valid.
 */
enum RlStatus rl_estimate_stats(const struct RlEstimate *est,
                                uint64_t *out_iterations,
                                double *out_residual,
                                uint8_t *out_feasible);

/**
 * Write the k x d row-orthonormal subspace estimate into `buf`
 * (row-major, k*d doubles).
 *
 * # Safety
 * `est` live; `buf` points to `cap` writable doubles.
 */
enum RlStatus rl_estimate_subspace(const struct RlEstimate *est,
                                   uint64_t k,
                                   double *buf,
                                   uint64_t cap);

/**
 * Alignment (1/k) ||A A-hat^T||_F^2 between the model's row space and the
 * estimate's leading-k subspace.
 *
 * # Safety
 * `model`, `est` live; `out` valid.
 */
enum RlStatus rl_alignment(const struct RlModel *model,
                           const struct RlEstimate *est,
                           uint64_t k,
                           double *out);

/**
 * Monte Carlo estimate of the conditioning parameter alpha.
 *
 * # Safety
 * `model` live; `out` valid.
 */
enum RlStatus rl_estimate_alpha_mc(const struct RlModel *model,
                                   uint64_t n_samples,
                                   uint64_t seed,
                                   double *out);

/**
 * Push-forward density of the sphere measure at `y` (k doubles, |y| < 1).
 *
 * # Safety
 * `y` points to `k` doubles; `out` valid.
 */
enum RlStatus rl_pushforward_density(const double *y, uint64_t k, uint64_t d, double *out);

/**
 * Evaluate every closed-form bound; pure and deterministic.
 *
 * # Safety
 * `inputs` and `out` must be valid pointers.
 */
enum RlStatus rl_compute_bounds(const struct RlBoundsInputs *inputs, struct RlBoundsReport *out);

/**
 * Matrix form of X = A^T G for a set of centers, for binding-side tests:
 * fills `buf` with the model's exact gradient matrix at the plan centers
 * (d x m_x, column-major).
 *
 * # Safety
 * `model` and `plan` live; `buf` holds `cap` writable doubles.
 */
enum RlStatus rl_model_exact_x(const struct RlModel *model,
                               const struct RlPlan *plan,
                               double *buf,
                               uint64_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIDGELIFT_H */
