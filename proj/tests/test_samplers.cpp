#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mrfmle/model.hpp"
#include "mrfmle/samplers.hpp"

using namespace mrfmle;

namespace {

const StateSpace kUnitBox = StateSpace::continuous_box(1, 0.0, 1.0);

FeatureMap cos_map(int p) { return builtin_feature_map(BuiltinFeature::Cos, p, kUnitBox); }

}  // namespace

TEST_CASE("gaussian reference draws carry the exact normal log-density") {
  FeatureMap fm;
  fm.p = 1;
  fm.eval_into = [](const State& x, Vec& out) { out[0] = x.sum(); };

  boost::math::normal_distribution<double> std_normal;
  for (int d : {1, 3}) {
    ReferenceChain ref = sample_reference_gaussian(fm, 500, d, RngSeed{11, 4});
    REQUIRE(ref.m() == 500);
    REQUIRE(ref.draws.size() == 500);
    for (int i = 0; i < ref.m(); ++i) {
      double lh = 0.0;
      for (int k = 0; k < d; ++k) lh += std::log(boost::math::pdf(std_normal, ref.draws[i][k]));
      CHECK(std::abs(ref.log_h[i] - lh) < 1e-12);
      CHECK(ref.features(i, 0) == ref.draws[i].sum());
    }
  }
}

TEST_CASE("gaussian reference sample mean obeys the CLT bound at 1e6 draws") {
  FeatureMap fm;
  fm.p = 1;
  fm.eval_into = [](const State& x, Vec& out) { out[0] = x[0]; };
  ReferenceChain ref = sample_reference_gaussian(fm, 1000000, 1, RngSeed{2024, 7});
  CHECK(std::abs(ref.features.col(0).mean()) < 4.0 / 1000.0);
}

TEST_CASE("reference samplers are bit-for-bit deterministic in the seed") {
  FeatureMap fm = cos_map(3);
  ReferenceChain a = sample_reference_stratified_gaussian(fm, 200, 0.0, 1.0, RngSeed{5, 1});
  ReferenceChain b = sample_reference_stratified_gaussian(fm, 200, 0.0, 1.0, RngSeed{5, 1});
  CHECK(a.features == b.features);
  CHECK(a.log_h == b.log_h);

  ReferenceChain c = sample_reference_stratified_gaussian(fm, 200, 0.0, 1.0, RngSeed{5, 2});
  CHECK(a.features != c.features);

  FeatureMap fm1;
  fm1.p = 1;
  fm1.eval_into = [](const State& x, Vec& out) { out[0] = x[0]; };
  ReferenceChain g1 = sample_reference_gaussian(fm1, 300, 2, RngSeed{9, 0});
  ReferenceChain g2 = sample_reference_gaussian(fm1, 300, 2, RngSeed{9, 0});
  CHECK(g1.features == g2.features);
}

TEST_CASE("stratified truncated-gaussian draws sit one per stratum with exact log_h") {
  FeatureMap fm = cos_map(2);
  const int m = 512;
  const double lo = 0.0, hi = 1.0;
  ReferenceChain ref = sample_reference_stratified_gaussian(fm, m, lo, hi, RngSeed{31, 3});
  REQUIRE(ref.m() == m);

  boost::math::normal_distribution<double> std_normal;
  const double fa = boost::math::cdf(std_normal, lo);
  const double fb = boost::math::cdf(std_normal, hi);
  const double log_mass = std::log(fb - fa);
  const double width = (fb - fa) / m;

  for (int i = 0; i < m; ++i) {
    double y = ref.draws[i][0];
    CHECK(y >= lo);
    CHECK(y <= hi);
    // draw i is uniform within stratum i of the truncated CDF
    double u = boost::math::cdf(std_normal, y);
    CHECK(u >= fa + i * width - 1e-12);
    CHECK(u <= fa + (i + 1) * width + 1e-12);
    if (i > 0) CHECK(y > ref.draws[i - 1][0]);

    double expected_log_h = std::log(boost::math::pdf(std_normal, y)) - log_mass;
    CHECK(std::abs(ref.log_h[i] - expected_log_h) < 1e-12);
  }

  // Stratification pins the sample mean to the exact truncated-normal mean.
  double mean = 0.0;
  for (int i = 0; i < m; ++i) mean += ref.draws[i][0];
  mean /= m;
  const double exact =
      (boost::math::pdf(std_normal, lo) - boost::math::pdf(std_normal, hi)) / (fb - fa);
  CHECK(std::abs(mean - exact) < 1e-3);
}

TEST_CASE("uniform discrete reference has constant log_h = -d log r") {
  StateSpace space = StateSpace::discrete_product(2, 2, {-1.0, 1.0});
  FeatureMap fm = pairwise_feature_map(space);
  const int m = 20000;
  ReferenceChain ref = sample_reference_uniform_discrete(fm, space, m, RngSeed{77, 0});
  const double expect = -2.0 * std::log(2.0);
  for (int i = 0; i < m; ++i) CHECK(ref.log_h[i] == expect);

  // empirical frequencies of the four states are near 1/4
  std::vector<int> counts(4, 0);
  for (const State& s : ref.draws) {
    int idx = (s[0] > 0 ? 1 : 0) + 2 * (s[1] > 0 ? 1 : 0);
    ++counts[static_cast<std::size_t>(idx)];
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(m) - 0.25) < 0.02);

  CHECK_THROWS_AS(sample_reference_uniform_discrete(fm, kUnitBox, 10, RngSeed{1, 0}),
                  std::invalid_argument);
}

TEST_CASE("subset_rows keeps the selected rows and refreshes the mean cache") {
  ObservedSample obs;
  obs.features.resize(5, 2);
  obs.features << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  for (int i = 0; i < 5; ++i) {
    State s(1);
    s[0] = i;
    obs.draws.push_back(s);
  }
  obs.refresh_means();
  CHECK((obs.mean_features - obs.features.colwise().mean().transpose()).cwiseAbs().maxCoeff() <
        1e-12);

  ObservedSample sub = subset_rows(obs, {3, 1, 4});
  REQUIRE(sub.n() == 3);
  CHECK(sub.features(0, 0) == 4);
  CHECK(sub.features(1, 0) == 2);
  CHECK(sub.features(2, 1) == 50);
  CHECK(sub.draws[0][0] == 3.0);
  CHECK(sub.mean_features[0] == doctest::Approx((4.0 + 2.0 + 5.0) / 3.0).epsilon(1e-15));
  CHECK(sub.mean_features[1] == doctest::Approx((40.0 + 20.0 + 50.0) / 3.0).epsilon(1e-15));
}

TEST_CASE("metropolis with a flat continuous target accepts every in-box proposal") {
  FeatureMap fm = cos_map(2);
  Vec zero = Vec::Zero(2);
  MetropolisConfig cfg;
  cfg.proposal_sd = 0.01;  // nearly every proposal stays inside the box
  cfg.burn_in = 100;
  cfg.thin = 1;
  ObservedSample obs = metropolis_sample(fm, kUnitBox, zero, 5000, cfg, RngSeed{42, 0});
  CHECK(obs.n() == 5000);
  CHECK(obs.acceptance_rate > 0.97);
  CHECK(obs.acceptance_warning);  // > 0.95 is flagged too
  CHECK((obs.mean_features - obs.features.colwise().mean().transpose()).cwiseAbs().maxCoeff() <
        1e-12);
  for (const State& s : obs.draws) {
    CHECK(s[0] >= 0.0);
    CHECK(s[0] <= 1.0);
  }
}

TEST_CASE("metropolis is bit-for-bit deterministic in the seed") {
  FeatureMap fm = cos_map(3);
  Vec theta(3);
  theta << 0.5, -0.2, 0.1;
  MetropolisConfig cfg;
  cfg.proposal_sd = 0.5;
  cfg.burn_in = 200;
  cfg.thin = 3;
  ObservedSample a = metropolis_sample(fm, kUnitBox, theta, 400, cfg, RngSeed{8, 8});
  ObservedSample b = metropolis_sample(fm, kUnitBox, theta, 400, cfg, RngSeed{8, 8});
  CHECK(a.features == b.features);
  CHECK(a.mean_features == b.mean_features);
  CHECK(a.acceptance_rate == b.acceptance_rate);

  ObservedSample c = metropolis_sample(fm, kUnitBox, theta, 400, cfg, RngSeed{8, 9});
  CHECK(a.features != c.features);
}

TEST_CASE("metropolis on an enumerable discrete target matches brute-force frequencies") {
  StateSpace space = StateSpace::discrete_product(2, 2, {-1.0, 1.0});
  FeatureMap fm = pairwise_feature_map(space);
  Vec theta(1);
  theta << 0.5;

  MetropolisConfig cfg;
  cfg.burn_in = 1000;
  cfg.thin = 2;
  const int n = 400000;
  ObservedSample obs = metropolis_sample(fm, space, theta, n, cfg, RngSeed{314, 1});

  // Exact state probabilities by enumeration.
  double log_c = brute_force_log_C(fm, theta, space);
  std::vector<double> exact(4), emp(4, 0.0);
  for (std::uint64_t i = 0; i < 4; ++i) {
    State s = space.state_at(i);
    exact[static_cast<std::size_t>(i)] = std::exp(theta.dot(fm.eval(s)) - log_c);
  }
  for (const State& s : obs.draws) {
    int idx = (s[0] > 0 ? 1 : 0) + 2 * (s[1] > 0 ? 1 : 0);
    emp[static_cast<std::size_t>(idx)] += 1.0 / n;
  }
  double tv = 0.0;
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(emp[static_cast<std::size_t>(k)] - exact[static_cast<std::size_t>(k)]) < 0.01);
    tv += 0.5 * std::abs(emp[static_cast<std::size_t>(k)] - exact[static_cast<std::size_t>(k)]);
  }
  CHECK(tv < 0.02);
}

TEST_CASE("metropolis flags chains with very low acceptance") {
  FeatureMap fm = cos_map(1);
  Vec theta(1);
  theta << 60.0;  // target sharply concentrated near x = 0
  MetropolisConfig cfg;
  cfg.proposal_sd = 5.0;  // nearly all proposals leave the box or fall far downhill
  cfg.burn_in = 200;
  cfg.thin = 1;
  ObservedSample obs = metropolis_sample(fm, kUnitBox, theta, 2000, cfg, RngSeed{606, 0});
  CHECK(obs.acceptance_rate < 0.05);
  CHECK(obs.acceptance_warning);
}

TEST_CASE("samplers validate their arguments") {
  FeatureMap fm = cos_map(2);
  Vec theta = Vec::Zero(2);
  MetropolisConfig cfg;
  CHECK_THROWS_AS(metropolis_sample(fm, kUnitBox, theta, 0, cfg, RngSeed{1, 0}),
                  std::invalid_argument);
  MetropolisConfig bad_sd;
  bad_sd.proposal_sd = 0.0;
  CHECK_THROWS_AS(metropolis_sample(fm, kUnitBox, theta, 10, bad_sd, RngSeed{1, 0}),
                  std::invalid_argument);
  MetropolisConfig bad_thin;
  bad_thin.thin = 0;
  CHECK_THROWS_AS(metropolis_sample(fm, kUnitBox, theta, 10, bad_thin, RngSeed{1, 0}),
                  std::invalid_argument);
  Vec wrong = Vec::Zero(3);
  CHECK_THROWS_AS(metropolis_sample(fm, kUnitBox, wrong, 10, cfg, RngSeed{1, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_reference_gaussian(fm, 0, 1, RngSeed{1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(sample_reference_stratified_gaussian(fm, 10, 1.0, 0.0, RngSeed{1, 0}),
                  std::invalid_argument);
}
