#pragma once

#include "mrfmle/solver.hpp"

namespace mrfmle {

// View of theta as (alpha, beta) with alpha the target coordinate.
struct CoordinateSplit {
  int target_index = 0;
  double alpha_hat = 0.0;
  Vec beta_hat;  // p-1

  static CoordinateSplit of(const Vec& theta, int target_index);
  // Puts `alpha` back at target_index; reassemble(alpha_hat) reproduces theta.
  Vec reassemble(double alpha) const;
};

// theta without coordinate t / beta re-embedded with `alpha` at t.
Vec drop_coordinate(const Vec& v, int t);
Vec embed_coordinate(const Vec& beta, int t, double alpha);

struct InferenceResult {
  int target_index = -1;
  Vec w_hat;                 // p-1 nuisance-projection vector
  double u_hat = 0.0;        // decorrelated score at the evaluation point
  double h_hat = 0.0;        // partial-information estimate H_{a|b}
  double s_stat = 0.0;       // sqrt(n/h)*u when h > 0, else 0
  double alpha_tilde = 0.0;  // one-step estimate (NaN when h <= 0)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double eta = 0.05;         // CI miscoverage level
  double p_value = 1.0;      // two-sided normal p-value of s_stat
  bool ci_defined = false;   // false iff h_hat <= 0
};

// Nuisance projection: argmin_w 1/2 w'H_bb w - w'H_ab + lambda'||w||_1 with the
// Hessian blocks taken at theta_hat, solved by proximal gradient through
// Hessian-vector products (the p x p matrix is never formed).
Vec fit_w_hat(const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
              const Vec& theta_hat, int target_index, double lambda_prime,
              const PenaltyConfig& solver_cfg);

// Same program against a prebuilt curvature operator; `hess_col_target` must be
// H e_t and `step_init` a step no larger than 1/||H_bb|| (backtracking still
// guards it). Shared by infer_all across coordinates.
FitResult fit_w_hat_quadratic(const CurvatureOperator& curv, const Vec& hess_col_target,
                              int target_index, double lambda_prime,
                              const PenaltyConfig& solver_cfg, double step_init);

// U(alpha0, beta_hat) = grad_alpha L - w' grad_beta L at the reassembled point.
double decorrelated_score(const FeatureMap& fm, const ObservedSample& obs,
                          const ReferenceChain& ref, double alpha0, const Vec& beta_hat,
                          const Vec& w_hat, int target_index);

// H_{a|b} = (H e_t)_t - w' drop(H e_t); one Hessian-vector product.
double variance_estimate(const FeatureMap& fm, const ReferenceChain& ref, const Vec& theta_hat,
                         const Vec& w_hat, int target_index);

// Decorrelated score test of alpha = alpha0.
InferenceResult score_test(const FeatureMap& fm, const ObservedSample& obs,
                           const ReferenceChain& ref, const Vec& theta_hat, double alpha0,
                           int target_index, double lambda_prime,
                           const PenaltyConfig& solver_cfg);

// One-step estimate alpha_tilde = alpha_hat - U/H with level-eta CI
// alpha_tilde +/- qnorm(1 - eta/2) / sqrt(n H).
InferenceResult one_step_estimate(const FeatureMap& fm, const ObservedSample& obs,
                                  const ReferenceChain& ref, const Vec& theta_hat,
                                  int target_index, double lambda_prime,
                                  const PenaltyConfig& solver_cfg, double eta);

// One-step inference for many coordinates off a single theta_hat: shares the
// weight pass, the curvature operator, its norm, and the full gradient.
// An empty target list means every coordinate 0..p-1.
std::vector<InferenceResult> infer_all(const FeatureMap& fm, const ObservedSample& obs,
                                       const ReferenceChain& ref, const Vec& theta_hat,
                                       const std::vector<int>& targets, double lambda_prime,
                                       const PenaltyConfig& solver_cfg, double eta);

}  // namespace mrfmle
