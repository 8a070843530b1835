#pragma once

#include <optional>

#include "mrfmle/samplers.hpp"

namespace mrfmle {

// Self-normalized importance weights of the reference chain at a given theta.
// Everything is done in log space with a single max shift:
//   log w_i = theta' phi(Y_i) - log h(Y_i)
//   norm_w  = exp(log_w - logsumexp(log_w)),  ess = 1 / sum norm_w^2
//   phi_bar = sum_i norm_w_i phi(Y_i)
struct WeightWorkspace {
  Vec log_w;
  double log_sum_w = 0.0;
  Vec norm_w;
  double ess = 0.0;
  Vec phi_bar;

  static WeightWorkspace compute(const ReferenceChain& ref, const Vec& theta);
  // Value-only variant: fills log_w / log_sum_w, skips norm_w / phi_bar.
  static WeightWorkspace compute_value_only(const ReferenceChain& ref, const Vec& theta);
};

struct LikelihoodEval {
  double value = 0.0;
  Vec grad;
  std::optional<Mat> hess;
  double ess = 0.0;
};

// Monte Carlo estimate of log C(theta): logsumexp_i(theta' phi(Y_i) - log h_i) - log m.
double log_c_estimate(const Vec& theta, const ReferenceChain& ref);

// L_n^m(theta) = -theta' mean_features + log( m^-1 sum_i w_i(theta) ).
double eval_loss(const Vec& theta, const ObservedSample& obs, const ReferenceChain& ref);

// grad = -mean_features + phi_bar(theta).
Vec eval_grad(const Vec& theta, const ObservedSample& obs, const ReferenceChain& ref);

// Loss and gradient sharing one weight pass; ess reported alongside.
LikelihoodEval eval_loss_grad(const Vec& theta, const ObservedSample& obs,
                              const ReferenceChain& ref);

// Weighted feature covariance sum_i norm_w_i (phi_i - phi_bar)(phi_i - phi_bar)'.
// Materializes p x p; guarded at p <= 4096.
Mat eval_hess(const Vec& theta, const ReferenceChain& ref);

// eval_hess(theta) * v in O(mp) without forming the matrix.
Vec hess_vector_product(const Vec& theta, const ReferenceChain& ref, const Vec& v);

// Hessian as an operator at a fixed theta: H v = Phi'(w .* (Phi v)) - phi_bar (phi_bar' v).
// Shares one weight pass across many products (the per-coordinate inference
// programs apply it thousands of times).
struct CurvatureOperator {
  const ReferenceChain* ref = nullptr;
  Vec norm_w;
  Vec phi_bar;
  double ess = 0.0;

  static CurvatureOperator at(const ReferenceChain& ref, const Vec& theta);
  Vec apply(const Vec& v) const;
  // Largest-eigenvalue estimate by a fixed-iteration power method
  // (deterministic start), used to pick proximal step sizes.
  double operator_norm(int iterations = 30) const;
};

// Symmetric Bregman divergence of the penalized objective between two points
// with the ridge part's g = ||.||_2^2:
//   (a-b)' [ grad L(a) - grad L(b) + 2 lambda2 (a - b) ]  >= 0 by convexity.
double bregman_diagnostic(const Vec& theta_a, const Vec& theta_b, const ObservedSample& obs,
                          const ReferenceChain& ref, double lambda2);

}  // namespace mrfmle
