#include "mrfmle/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mrfmle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrtHalfPi = 1.2533141373155002512078826424055;  // sqrt(pi/2)

std::vector<int> all_targets(int p) {
  std::vector<int> t(p);
  std::iota(t.begin(), t.end(), 0);
  return t;
}

}  // namespace

PenaltyConfig choose_penalty(const FeatureMap& fm, const ObservedSample& obs,
                             const ReferenceChain& ref, const InferencePipelineConfig& cfg,
                             RngSeed cv_seed) {
  switch (cfg.lambda_rule) {
    case LambdaRule::Fixed:
      return cfg.solver;
    case LambdaRule::RateFormula: {
      const double lp = std::log(static_cast<double>(fm.p));
      const double n = obs.n(), m = ref.m();
      const double rate = std::sqrt(lp / n) + std::sqrt(lp / m) + lp / m;
      PenaltyConfig out = cfg.solver;
      out.lambda1 = cfg.rate_constant * rate;
      out.lambda2 = cfg.lambda2_factor * out.lambda1;
      out.lambda_prime = out.lambda1;
      return out;
    }
    case LambdaRule::CrossValidate:
    default: {
      auto grid = default_penalty_grid(obs.n(), ref.m(), fm.p, cfg.solver);
      return cross_validate(fm, obs, ref, grid, cfg.cv_folds, cv_seed).first;
    }
  }
}

PipelineResult fit_and_infer_all(const FeatureMap& fm, const ObservedSample& obs,
                                 const ReferenceChain& ref,
                                 const InferencePipelineConfig& cfg, RngSeed cv_seed,
                                 std::vector<int> targets) {
  PipelineResult out;
  out.chosen = choose_penalty(fm, obs, ref, cfg, cv_seed);
  out.fit = solve(fm, obs, ref, out.chosen, Vec::Zero(fm.p));
  if (targets.empty()) targets = all_targets(fm.p);
  out.coords = infer_all(fm, obs, ref, out.fit.theta_hat, targets, out.chosen.lambda_prime,
                         cfg.solver, cfg.eta);
  return out;
}

SplitInference split_and_infer(const FeatureMap& fm, const ObservedSample& obs,
                               const ReferenceChain& ref, const InferencePipelineConfig& cfg,
                               const Vec& null_values, RngSeed seed) {
  const int n = obs.n();
  const int p = fm.p;
  if (n < 4) throw std::invalid_argument("split_and_infer: needs n >= 4");
  if (null_values.size() != p)
    throw std::invalid_argument("split_and_infer: null_values must have length p");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  SplitInference out;
  out.half1.assign(perm.begin(), perm.begin() + n / 2);
  out.half2.assign(perm.begin() + n / 2, perm.end());
  std::sort(out.half1.begin(), out.half1.end());
  std::sort(out.half2.begin(), out.half2.end());

  ObservedSample obs1 = subset_rows(obs, out.half1);
  ObservedSample obs2 = subset_rows(obs, out.half2);
  out.pipe1 = fit_and_infer_all(fm, obs1, ref, cfg, seed.sub(1));
  out.pipe2 = fit_and_infer_all(fm, obs2, ref, cfg, seed.sub(2));

  const double n_full = static_cast<double>(n);
  out.t1 = Vec::Constant(p, kNaN);
  out.t2 = Vec::Constant(p, kNaN);
  for (int j = 0; j < p; ++j) {
    const InferenceResult& a = out.pipe1.coords[static_cast<size_t>(j)];
    const InferenceResult& b = out.pipe2.coords[static_cast<size_t>(j)];
    bool ok = a.h_hat > 0.0 && b.h_hat > 0.0 && std::isfinite(a.alpha_tilde) &&
              std::isfinite(b.alpha_tilde);
    if (!ok) {
      out.undefined_coords.push_back(j);
      continue;
    }
    out.t1[j] = (a.alpha_tilde - null_values[j]) * std::sqrt(n_full * a.h_hat / 2.0);
    out.t2[j] = (b.alpha_tilde - null_values[j]) * std::sqrt(n_full * b.h_hat / 2.0);
  }
  return out;
}

SelectionResult mirror_select(const Vec& t1, const Vec& t2, const MirrorConfig& cfg) {
  if (t1.size() != t2.size()) throw std::invalid_argument("mirror_select: length mismatch");
  if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw std::invalid_argument("mirror_select: q not in (0,1)");
  const int p = static_cast<int>(t1.size());

  SelectionResult out;
  out.method = SelectionMethod::SingleSplit;
  out.q = cfg.q;
  out.mirror.t1 = t1;
  out.mirror.t2 = t2;
  out.mirror.m_values = Vec::Constant(p, kNaN);

  std::vector<double> finite_m;
  finite_m.reserve(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    double a = t1[j], b = t2[j];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;  // excluded coordinate
    double sgn = (a * b > 0.0) ? 1.0 : (a * b < 0.0 ? -1.0 : 0.0);
    double f = cfg.f_kind == MirrorKind::Product ? std::abs(a) * std::abs(b)
                                                 : std::abs(a) + std::abs(b);
    out.mirror.m_values[j] = sgn * f;
    finite_m.push_back(out.mirror.m_values[j]);
  }

  std::vector<double> sorted_m = finite_m;
  std::sort(sorted_m.begin(), sorted_m.end());
  std::vector<double> cands;
  cands.reserve(sorted_m.size());
  for (double v : sorted_m) cands.push_back(std::abs(v));
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  double tau = kInf;
  for (double c : cands) {
    // #{M < -c} and #{M > c} on the sorted finite values.
    auto lo = std::lower_bound(sorted_m.begin(), sorted_m.end(), -c);
    std::ptrdiff_t neg = lo - sorted_m.begin();
    auto hi = std::upper_bound(sorted_m.begin(), sorted_m.end(), c);
    std::ptrdiff_t pos = sorted_m.end() - hi;
    double fdp;
    if (pos == 0) {
      fdp = neg == 0 ? 0.0 : kInf;
    } else {
      fdp = static_cast<double>(neg) / static_cast<double>(pos);
    }
    out.mirror.fdp_hat_curve.emplace_back(c, fdp);
    if (std::isinf(tau) && fdp <= cfg.q) tau = c;
  }
  out.mirror.tau_q = tau;

  for (int j = 0; j < p; ++j) {
    if (out.mirror.m_values[j] > tau) out.selected.push_back(j);  // NaN compares false
  }
  return out;
}

SelectionResult select_from_inclusion_rates(const Vec& inclusion_rates, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("select_from_inclusion_rates: q not in (0,1)");
  const int p = static_cast<int>(inclusion_rates.size());

  std::vector<double> sorted(inclusion_rates.data(), inclusion_rates.data() + p);
  std::sort(sorted.begin(), sorted.end());

  double prefix = 0.0;
  double threshold = 0.0;  // ell = 0 convention
  for (int ell = 0; ell < p; ++ell) {
    prefix += sorted[static_cast<size_t>(ell)];
    if (prefix <= q) threshold = sorted[static_cast<size_t>(ell)];
    else break;
  }

  SelectionResult out;
  out.method = SelectionMethod::MultiSplit;
  out.q = q;
  out.inclusion_rates = inclusion_rates;
  out.inclusion_threshold = threshold;
  for (int j = 0; j < p; ++j) {
    if (inclusion_rates[j] > threshold) out.selected.push_back(j);
  }
  return out;
}

SelectionResult multi_split_select(const FeatureMap& fm, const ObservedSample& obs,
                                   const ReferenceChain& ref, const MirrorConfig& cfg,
                                   const InferencePipelineConfig& pipeline,
                                   const Vec& null_values, RngSeed seed) {
  if (cfg.n_splits < 2) throw std::invalid_argument("multi_split_select: needs n_splits >= 2");
  const int p = fm.p;

  Vec rates = Vec::Zero(p);
  for (int k = 0; k < cfg.n_splits; ++k) {
    SplitInference si = split_and_infer(fm, obs, ref, pipeline, null_values, seed.sub(
        static_cast<std::uint64_t>(k) * 4));
    SelectionResult sel = mirror_select(si.t1, si.t2, cfg);
    if (sel.selected.empty()) continue;  // contributes 0 to every rate
    double w = 1.0 / static_cast<double>(sel.selected.size());
    for (int j : sel.selected) rates[j] += w;
  }
  rates /= static_cast<double>(cfg.n_splits);

  SelectionResult out = select_from_inclusion_rates(rates, cfg.q);
  return out;
}

SelectionResult ebh_select_values(const Vec& e_values, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("ebh_select: q not in (0,1)");
  const int p = static_cast<int>(e_values.size());

  SelectionResult out;
  out.method = SelectionMethod::EBH;
  out.q = q;
  out.e_values = e_values;

  std::vector<int> order(static_cast<size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (e_values[a] != e_values[b]) return e_values[a] > e_values[b];
    return a < b;  // boundary ties resolved by ascending coordinate index
  });

  int k_star = 0;
  for (int k = 1; k <= p; ++k) {
    double e_k = e_values[order[static_cast<size_t>(k - 1)]];
    if (static_cast<double>(k) * e_k / static_cast<double>(p) >= 1.0 / q) k_star = k;
  }
  out.k_star = k_star;
  out.selected.assign(order.begin(), order.begin() + k_star);
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

SelectionResult ebh_select(const std::vector<InferenceResult>& inference,
                           const Vec& null_values, double q, int n) {
  const int p = static_cast<int>(inference.size());
  if (null_values.size() != p) throw std::invalid_argument("ebh_select: null_values length");

  Vec e = Vec::Zero(p);
  for (int j = 0; j < p; ++j) {
    const InferenceResult& r = inference[static_cast<size_t>(j)];
    if (r.h_hat > 0.0 && std::isfinite(r.alpha_tilde)) {
      e[j] = kSqrtHalfPi * std::sqrt(n * r.h_hat) * std::abs(r.alpha_tilde - null_values[j]);
    }
  }
  return ebh_select_values(e, q);
}

}  // namespace mrfmle
