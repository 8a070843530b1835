#include "mrfmle/samplers.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

namespace mrfmle {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log sqrt(2 pi)

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

Mat cache_features(const FeatureMap& fm, const std::vector<State>& draws) {
  Mat out(static_cast<Eigen::Index>(draws.size()), fm.p);
  Vec phi(fm.p);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    fm.eval_into(draws[i], phi);
    out.row(static_cast<Eigen::Index>(i)) = phi.transpose();
  }
  return out;
}
}  // namespace

ObservedSample subset_rows(const ObservedSample& obs, const std::vector<int>& rows) {
  ObservedSample out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), obs.features.cols());
  out.draws.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = obs.features.row(rows[i]);
    if (!obs.draws.empty()) out.draws.push_back(obs.draws[static_cast<std::size_t>(rows[i])]);
  }
  out.acceptance_rate = obs.acceptance_rate;
  out.acceptance_warning = obs.acceptance_warning;
  out.refresh_means();
  return out;
}

ReferenceChain sample_reference_gaussian(const FeatureMap& fm, int m, int d, RngSeed seed) {
  if (m < 1 || d < 1) throw std::invalid_argument("sample_reference_gaussian: m, d >= 1");
  Rng rng(seed);
  ReferenceChain ref;
  ref.kind = ReferenceKind::IidGaussian;
  ref.draws.reserve(static_cast<std::size_t>(m));
  ref.log_h.resize(m);
  for (int i = 0; i < m; ++i) {
    State y(d);
    double lh = 0.0;
    for (int k = 0; k < d; ++k) {
      y[k] = rng.normal();
      lh += normal_log_pdf(y[k]);
    }
    ref.draws.push_back(std::move(y));
    ref.log_h[i] = lh;
  }
  ref.features = cache_features(fm, ref.draws);
  return ref;
}

ReferenceChain sample_reference_stratified_gaussian(const FeatureMap& fm, int m, double lo,
                                                    double hi, RngSeed seed) {
  if (m < 1) throw std::invalid_argument("m >= 1");
  if (!(lo < hi)) throw std::invalid_argument("lo < hi");
  Rng rng(seed);
  boost::math::normal_distribution<double> std_normal;
  const double fa = boost::math::cdf(std_normal, lo);
  const double fb = boost::math::cdf(std_normal, hi);
  const double log_mass = std::log(fb - fa);
  ReferenceChain ref;
  ref.kind = ReferenceKind::StratifiedTruncGaussian;
  ref.draws.reserve(static_cast<std::size_t>(m));
  ref.log_h.resize(m);
  for (int i = 0; i < m; ++i) {
    double u = (static_cast<double>(i) + rng.uniform01()) / static_cast<double>(m);
    double q = fa + u * (fb - fa);
    // Clamp away from the open endpoints so the quantile stays finite.
    q = std::min(std::max(q, 1e-300), 1.0 - 1e-16);
    State y(1);
    y[0] = boost::math::quantile(std_normal, q);
    ref.log_h[i] = normal_log_pdf(y[0]) - log_mass;
    ref.draws.push_back(std::move(y));
  }
  ref.features = cache_features(fm, ref.draws);
  return ref;
}

ReferenceChain sample_reference_uniform_discrete(const FeatureMap& fm, const StateSpace& space,
                                                 int m, RngSeed seed) {
  if (!space.discrete()) throw std::invalid_argument("need a discrete space");
  if (m < 1) throw std::invalid_argument("m >= 1");
  Rng rng(seed);
  ReferenceChain ref;
  ref.kind = ReferenceKind::IidUniformDiscrete;
  ref.draws.reserve(static_cast<std::size_t>(m));
  ref.log_h = Vec::Constant(m, -space.d * std::log(static_cast<double>(space.r)));
  for (int i = 0; i < m; ++i) {
    State y(space.d);
    for (int k = 0; k < space.d; ++k)
      y[k] = space.levels[static_cast<std::size_t>(rng.uniform_int(space.r))];
    ref.draws.push_back(std::move(y));
  }
  ref.features = cache_features(fm, ref.draws);
  return ref;
}

ObservedSample metropolis_sample(const FeatureMap& fm, const StateSpace& space,
                                 const Vec& theta_star, int n, const MetropolisConfig& cfg,
                                 RngSeed seed) {
  if (n < 1) throw std::invalid_argument("n >= 1");
  if (cfg.proposal_sd <= 0.0 || cfg.thin < 1 || cfg.burn_in < 0)
    throw std::invalid_argument("bad Metropolis config");
  if (theta_star.size() != fm.p) throw std::invalid_argument("theta dimension mismatch");

  Rng rng(seed);
  const bool discrete = space.discrete();
  // Start at the box center / all-first-level state.
  State x(space.d);
  if (discrete)
    for (int k = 0; k < space.d; ++k) x[k] = space.levels[0];
  else
    for (int k = 0; k < space.d; ++k) x[k] = 0.5 * (space.lo + space.hi);

  Vec phi_x(fm.p), phi_prop(fm.p);
  fm.eval_into(x, phi_x);
  double energy = theta_star.dot(phi_x);

  ObservedSample obs;
  obs.draws.reserve(static_cast<std::size_t>(n));
  obs.features.resize(n, fm.p);

  long long accepted = 0, proposed = 0;
  int kept = 0, since_burn = 0;
  State prop(space.d);
  while (kept < n) {
    // Propose.
    bool in_support = true;
    if (discrete) {
      prop = x;
      int site = rng.uniform_int(space.d);
      prop[site] = space.levels[static_cast<std::size_t>(rng.uniform_int(space.r))];
    } else {
      for (int k = 0; k < space.d; ++k) {
        prop[k] = x[k] + cfg.proposal_sd * rng.normal();
        if (prop[k] < space.lo || prop[k] > space.hi) in_support = false;
      }
    }
    bool past_burn = since_burn >= cfg.burn_in;
    if (past_burn) ++proposed;
    if (in_support) {
      fm.eval_into(prop, phi_prop);
      double e_prop = theta_star.dot(phi_prop);
      // Symmetric proposal: accept with min(1, exp(e' - e)).
      if (e_prop >= energy || rng.uniform01() < std::exp(e_prop - energy)) {
        x = prop;
        phi_x = phi_prop;
        energy = e_prop;
        if (past_burn) ++accepted;
      }
    }
    // (Proposals outside the box have target density zero: always rejected.)
    ++since_burn;
    if (past_burn && (since_burn - cfg.burn_in) % cfg.thin == 0) {
      obs.features.row(kept) = phi_x.transpose();
      obs.draws.push_back(x);
      ++kept;
    }
  }
  obs.refresh_means();
  obs.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed)
                                     : 1.0;
  obs.acceptance_warning = obs.acceptance_rate < 0.05 || obs.acceptance_rate > 0.95;
  return obs;
}

}  // namespace mrfmle
