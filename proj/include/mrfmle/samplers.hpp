#pragma once

#include "mrfmle/model.hpp"
#include "mrfmle/rng.hpp"

namespace mrfmle {

enum class ReferenceKind {
  IidGaussian,             // i.i.d. N(0, I_d), exact normal log-density
  StratifiedTruncGaussian, // d=1 truncated normal on [lo,hi], one jittered draw
                           // per equal-probability stratum (variance-reduced)
  IidUniformDiscrete,      // i.i.d. uniform over an enumerable discrete space
  MarkovKernel             // reserved for user-supplied chains
};

// Reference draws Y_1..Y_m with their exact log h(Y_i) and cached features.
// The feature matrix is computed once here because every optimizer iteration
// downstream re-uses it.
struct ReferenceChain {
  ReferenceKind kind = ReferenceKind::IidGaussian;
  std::vector<State> draws;
  Vec log_h;      // m
  Mat features;   // m x p

  int m() const { return static_cast<int>(log_h.size()); }
};

// Observed sample X_1..X_n with cached features and their column means.
struct ObservedSample {
  std::vector<State> draws;
  Mat features;        // n x p
  Vec mean_features;   // p
  double acceptance_rate = 1.0;  // Metropolis diagnostics (1.0 for exact samplers)
  bool acceptance_warning = false;

  int n() const { return static_cast<int>(features.rows()); }

  // Rebuild the cache after assembling draws/features by hand (tests, subsets).
  void refresh_means() { mean_features = features.colwise().mean(); }
};

// Row subset (used by data splitting and cross-validation).
ObservedSample subset_rows(const ObservedSample& obs, const std::vector<int>& rows);

// m i.i.d. standard normal d-vectors; log_h is the exact N(0, I_d) log-density.
ReferenceChain sample_reference_gaussian(const FeatureMap& fm, int m, int d, RngSeed seed);

// d=1 truncated standard normal on [lo,hi], stratified: u_i = (i + U_i)/m,
// y_i = Phi^{-1}(Phi(lo) + u_i (Phi(hi) - Phi(lo))). log_h is the exact
// truncated-normal log-density. Keeps importance-sampling estimates unbiased
// (each draw is uniform within its stratum) while reducing the reference-side
// Monte Carlo error by an order of magnitude at the same m.
ReferenceChain sample_reference_stratified_gaussian(const FeatureMap& fm, int m, double lo,
                                                    double hi, RngSeed seed);

// i.i.d. uniform draws over an enumerable discrete space; log_h = -d log r.
ReferenceChain sample_reference_uniform_discrete(const FeatureMap& fm, const StateSpace& space,
                                                 int m, RngSeed seed);

struct MetropolisConfig {
  double proposal_sd = 1.0;
  int burn_in = 1000;
  int thin = 10;
};

// Random-walk Metropolis targeting p(.|theta_star) on the given space.
// Continuous boxes use a Gaussian step (proposals outside the box are
// rejected); discrete spaces resample one uniformly chosen site. The first
// burn_in accepted-or-rejected steps are discarded, then every thin-th state
// is kept until n draws are collected. Acceptance rates outside [0.05, 0.95]
// set the warning flag (diagnostic only).
ObservedSample metropolis_sample(const FeatureMap& fm, const StateSpace& space,
                                 const Vec& theta_star, int n, const MetropolisConfig& cfg,
                                 RngSeed seed);

}  // namespace mrfmle
