#include "mrfmle/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mrfmle {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

void check_target(int p, int t) {
  if (p < 2) throw std::invalid_argument("inference: needs p >= 2");
  if (t < 0 || t >= p) throw std::invalid_argument("inference: target_index out of range");
}

double two_sided_p(double s) { return std::erfc(std::abs(s) / std::sqrt(2.0)); }

// Fills the statistic / one-step / CI block of a result given (u, h) and the
// estimate at the target coordinate.
void finish_result(InferenceResult& r, double alpha_hat, double n, double eta) {
  r.eta = eta;
  if (r.h_hat > 0.0) {
    r.s_stat = std::sqrt(n / r.h_hat) * r.u_hat;
    r.alpha_tilde = alpha_hat - r.u_hat / r.h_hat;
    double half = boost::math::quantile(kStdNormal, 1.0 - eta / 2.0) / std::sqrt(n * r.h_hat);
    r.ci_lo = r.alpha_tilde - half;
    r.ci_hi = r.alpha_tilde + half;
    r.ci_defined = true;
  } else {
    r.s_stat = 0.0;
    r.alpha_tilde = std::numeric_limits<double>::quiet_NaN();
    r.ci_lo = r.ci_hi = std::numeric_limits<double>::quiet_NaN();
    r.ci_defined = false;
  }
  r.p_value = two_sided_p(r.s_stat);
}

}  // namespace

CoordinateSplit CoordinateSplit::of(const Vec& theta, int target_index) {
  check_target(static_cast<int>(theta.size()), target_index);
  CoordinateSplit cs;
  cs.target_index = target_index;
  cs.alpha_hat = theta[target_index];
  cs.beta_hat = drop_coordinate(theta, target_index);
  return cs;
}

Vec CoordinateSplit::reassemble(double alpha) const {
  return embed_coordinate(beta_hat, target_index, alpha);
}

Vec drop_coordinate(const Vec& v, int t) {
  Vec out(v.size() - 1);
  out.head(t) = v.head(t);
  out.tail(v.size() - 1 - t) = v.tail(v.size() - 1 - t);
  return out;
}

Vec embed_coordinate(const Vec& beta, int t, double alpha) {
  Vec out(beta.size() + 1);
  out.head(t) = beta.head(t);
  out[t] = alpha;
  out.tail(beta.size() - t) = beta.tail(beta.size() - t);
  return out;
}

FitResult fit_w_hat_quadratic(const CurvatureOperator& curv, const Vec& hess_col_target,
                              int target_index, double lambda_prime,
                              const PenaltyConfig& solver_cfg, double step_init) {
  const int p = static_cast<int>(hess_col_target.size());
  check_target(p, target_index);
  const Vec h_ab = drop_coordinate(hess_col_target, target_index);
  const int t = target_index;

  // q(w) = 1/2 w'H_bb w - w'H_ab; grad = H_bb w - H_ab = drop(H(embed(w) - e_t)).
  SmoothProblem prob;
  prob.value_grad = [&curv, &h_ab, t](const Vec& w, Vec& grad) {
    Vec hbb_w = drop_coordinate(curv.apply(embed_coordinate(w, t, 0.0)), t);
    grad = hbb_w - h_ab;
    return 0.5 * w.dot(hbb_w) - w.dot(h_ab);
  };
  prob.value = [&curv, &h_ab, t](const Vec& w) {
    Vec hbb_w = drop_coordinate(curv.apply(embed_coordinate(w, t, 0.0)), t);
    return 0.5 * w.dot(hbb_w) - w.dot(h_ab);
  };

  PenaltyConfig cfg = solver_cfg;
  cfg.lambda1 = lambda_prime;
  cfg.lambda2 = 0.0;
  if (step_init > 0.0) cfg.step_init = step_init;
  return fista_minimize(prob, Vec::Zero(p - 1), lambda_prime, cfg);
}

Vec fit_w_hat(const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
              const Vec& theta_hat, int target_index, double lambda_prime,
              const PenaltyConfig& solver_cfg) {
  check_target(fm.p, target_index);
  if (obs.features.cols() != fm.p) throw std::invalid_argument("fit_w_hat: dimension mismatch");
  CurvatureOperator curv = CurvatureOperator::at(ref, theta_hat);
  double opn = curv.operator_norm();
  Vec e_t = Vec::Zero(fm.p);
  e_t[target_index] = 1.0;
  Vec col_t = curv.apply(e_t);
  double step = opn > 0.0 ? 1.0 / opn : solver_cfg.step_init;
  return fit_w_hat_quadratic(curv, col_t, target_index, lambda_prime, solver_cfg, step)
      .theta_hat;
}

double decorrelated_score(const FeatureMap& fm, const ObservedSample& obs,
                          const ReferenceChain& ref, double alpha0, const Vec& beta_hat,
                          const Vec& w_hat, int target_index) {
  check_target(fm.p, target_index);
  if (beta_hat.size() != fm.p - 1 || w_hat.size() != fm.p - 1)
    throw std::invalid_argument("decorrelated_score: dimension mismatch");
  Vec point = embed_coordinate(beta_hat, target_index, alpha0);
  Vec g = eval_grad(point, obs, ref);
  return g[target_index] - w_hat.dot(drop_coordinate(g, target_index));
}

double variance_estimate(const FeatureMap& fm, const ReferenceChain& ref, const Vec& theta_hat,
                         const Vec& w_hat, int target_index) {
  check_target(fm.p, target_index);
  Vec e_t = Vec::Zero(fm.p);
  e_t[target_index] = 1.0;
  Vec col_t = hess_vector_product(theta_hat, ref, e_t);
  return col_t[target_index] - w_hat.dot(drop_coordinate(col_t, target_index));
}

InferenceResult score_test(const FeatureMap& fm, const ObservedSample& obs,
                           const ReferenceChain& ref, const Vec& theta_hat, double alpha0,
                           int target_index, double lambda_prime,
                           const PenaltyConfig& solver_cfg) {
  InferenceResult r;
  r.target_index = target_index;
  r.w_hat = fit_w_hat(fm, obs, ref, theta_hat, target_index, lambda_prime, solver_cfg);
  CoordinateSplit cs = CoordinateSplit::of(theta_hat, target_index);
  r.u_hat = decorrelated_score(fm, obs, ref, alpha0, cs.beta_hat, r.w_hat, target_index);
  r.h_hat = variance_estimate(fm, ref, theta_hat, r.w_hat, target_index);
  finish_result(r, cs.alpha_hat, static_cast<double>(obs.n()), 0.05);
  return r;
}

InferenceResult one_step_estimate(const FeatureMap& fm, const ObservedSample& obs,
                                  const ReferenceChain& ref, const Vec& theta_hat,
                                  int target_index, double lambda_prime,
                                  const PenaltyConfig& solver_cfg, double eta) {
  InferenceResult r;
  r.target_index = target_index;
  r.w_hat = fit_w_hat(fm, obs, ref, theta_hat, target_index, lambda_prime, solver_cfg);
  CoordinateSplit cs = CoordinateSplit::of(theta_hat, target_index);
  r.u_hat =
      decorrelated_score(fm, obs, ref, cs.alpha_hat, cs.beta_hat, r.w_hat, target_index);
  r.h_hat = variance_estimate(fm, ref, theta_hat, r.w_hat, target_index);
  finish_result(r, cs.alpha_hat, static_cast<double>(obs.n()), eta);
  return r;
}

std::vector<InferenceResult> infer_all(const FeatureMap& fm, const ObservedSample& obs,
                                       const ReferenceChain& ref, const Vec& theta_hat,
                                       const std::vector<int>& targets, double lambda_prime,
                                       const PenaltyConfig& solver_cfg, double eta) {
  const int p = fm.p;
  CurvatureOperator curv = CurvatureOperator::at(ref, theta_hat);
  const double opn = curv.operator_norm();
  const double step = opn > 0.0 ? 1.0 / opn : solver_cfg.step_init;
  // The evaluation point (alpha_hat, beta_hat) reassembles to theta_hat itself,
  // so one gradient serves every coordinate.
  const Vec g = eval_grad(theta_hat, obs, ref);
  const double n = static_cast<double>(obs.n());

  std::vector<int> want = targets;
  if (want.empty()) {
    want.resize(static_cast<std::size_t>(p));
    std::iota(want.begin(), want.end(), 0);
  }
  std::vector<InferenceResult> out;
  out.reserve(want.size());
  for (int t : want) {
    check_target(p, t);
    Vec e_t = Vec::Zero(p);
    e_t[t] = 1.0;
    Vec col_t = curv.apply(e_t);
    InferenceResult r;
    r.target_index = t;
    r.w_hat = fit_w_hat_quadratic(curv, col_t, t, lambda_prime, solver_cfg, step).theta_hat;
    r.u_hat = g[t] - r.w_hat.dot(drop_coordinate(g, t));
    r.h_hat = col_t[t] - r.w_hat.dot(drop_coordinate(col_t, t));
    finish_result(r, theta_hat[t], n, eta);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mrfmle
