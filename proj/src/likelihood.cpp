#include "mrfmle/likelihood.hpp"

#include <cmath>
#include <stdexcept>

namespace mrfmle {

namespace {
void fill_log_weights(const ReferenceChain& ref, const Vec& theta, WeightWorkspace& ws) {
  if (theta.size() != ref.features.cols())
    throw std::invalid_argument("theta/reference dimension mismatch");
  ws.log_w.noalias() = ref.features * theta;
  ws.log_w -= ref.log_h;
  double mx = ws.log_w.maxCoeff();
  ws.log_sum_w = mx + std::log((ws.log_w.array() - mx).exp().sum());
}
}  // namespace

WeightWorkspace WeightWorkspace::compute_value_only(const ReferenceChain& ref, const Vec& theta) {
  WeightWorkspace ws;
  fill_log_weights(ref, theta, ws);
  return ws;
}

WeightWorkspace WeightWorkspace::compute(const ReferenceChain& ref, const Vec& theta) {
  WeightWorkspace ws;
  fill_log_weights(ref, theta, ws);
  ws.norm_w = (ws.log_w.array() - ws.log_sum_w).exp();
  ws.ess = 1.0 / ws.norm_w.squaredNorm();
  ws.phi_bar.noalias() = ref.features.transpose() * ws.norm_w;
  return ws;
}

double log_c_estimate(const Vec& theta, const ReferenceChain& ref) {
  auto ws = WeightWorkspace::compute_value_only(ref, theta);
  return ws.log_sum_w - std::log(static_cast<double>(ref.m()));
}

double eval_loss(const Vec& theta, const ObservedSample& obs, const ReferenceChain& ref) {
  double v = -theta.dot(obs.mean_features) + log_c_estimate(theta, ref);
  if (!std::isfinite(v)) throw std::runtime_error("eval_loss: non-finite value");
  return v;
}

Vec eval_grad(const Vec& theta, const ObservedSample& obs, const ReferenceChain& ref) {
  auto ws = WeightWorkspace::compute(ref, theta);
  return ws.phi_bar - obs.mean_features;
}

LikelihoodEval eval_loss_grad(const Vec& theta, const ObservedSample& obs,
                              const ReferenceChain& ref) {
  auto ws = WeightWorkspace::compute(ref, theta);
  LikelihoodEval out;
  out.value = -theta.dot(obs.mean_features) + ws.log_sum_w - std::log(static_cast<double>(ref.m()));
  if (!std::isfinite(out.value)) throw std::runtime_error("eval_loss_grad: non-finite value");
  out.grad = ws.phi_bar - obs.mean_features;
  out.ess = ws.ess;
  return out;
}

Mat eval_hess(const Vec& theta, const ReferenceChain& ref) {
  const Eigen::Index p = ref.features.cols();
  if (p > 4096) throw std::invalid_argument("eval_hess: p exceeds materialization guard (4096)");
  auto ws = WeightWorkspace::compute(ref, theta);
  Mat weighted = ws.norm_w.asDiagonal() * ref.features;
  Mat h = ref.features.transpose() * weighted;
  h.noalias() -= ws.phi_bar * ws.phi_bar.transpose();
  h = 0.5 * (h + h.transpose()).eval();
  return h;
}

Vec hess_vector_product(const Vec& theta, const ReferenceChain& ref, const Vec& v) {
  return CurvatureOperator::at(ref, theta).apply(v);
}

CurvatureOperator CurvatureOperator::at(const ReferenceChain& ref, const Vec& theta) {
  auto ws = WeightWorkspace::compute(ref, theta);
  CurvatureOperator op;
  op.ref = &ref;
  op.norm_w = std::move(ws.norm_w);
  op.phi_bar = std::move(ws.phi_bar);
  op.ess = ws.ess;
  return op;
}

Vec CurvatureOperator::apply(const Vec& v) const {
  if (v.size() != ref->features.cols()) throw std::invalid_argument("HVP dimension mismatch");
  Vec t = ref->features * v;               // m
  t.array() *= norm_w.array();             // w .* (Phi v)
  Vec out = ref->features.transpose() * t; // p
  out.noalias() -= phi_bar * phi_bar.dot(v);
  return out;
}

double CurvatureOperator::operator_norm(int iterations) const {
  const Eigen::Index p = ref->features.cols();
  Vec v = Vec::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec av = apply(v);
    lambda = av.norm();
    if (lambda <= 0.0) return 0.0;
    v = av / lambda;
  }
  return lambda;
}

double bregman_diagnostic(const Vec& theta_a, const Vec& theta_b, const ObservedSample& obs,
                          const ReferenceChain& ref, double lambda2) {
  Vec diff = theta_a - theta_b;
  Vec ga = eval_grad(theta_a, obs, ref);
  Vec gb = eval_grad(theta_b, obs, ref);
  return diff.dot(ga - gb) + 2.0 * lambda2 * diff.squaredNorm();
}

}  // namespace mrfmle
