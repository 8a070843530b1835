#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mrfmle/fdr.hpp"
#include "mrfmle/model.hpp"
#include "mrfmle/rng.hpp"
#include "mrfmle/samplers.hpp"

using namespace mrfmle;

namespace {

const StateSpace kUnitBox = StateSpace::continuous_box(1, 0.0, 1.0);

struct Toy {
  FeatureMap fm;
  ReferenceChain ref;
  ObservedSample obs;
};

Toy make_toy(int p, int n, int m, std::uint64_t seed) {
  Toy t;
  t.fm = builtin_feature_map(BuiltinFeature::Cos, p, kUnitBox);
  t.ref = sample_reference_stratified_gaussian(t.fm, m, 0.0, 1.0, RngSeed{seed, 1});
  Rng rng(RngSeed{seed, 2});
  Vec theta_star = Vec::Zero(p);
  for (int j = 0; j < std::min(p, 2); ++j) theta_star[j] = 0.6 + 0.2 * rng.uniform01();
  MetropolisConfig cfg;
  cfg.proposal_sd = 0.5;
  cfg.burn_in = 300;
  cfg.thin = 5;
  t.obs = metropolis_sample(t.fm, kUnitBox, theta_star, n, cfg, RngSeed{seed, 3});
  return t;
}

InferencePipelineConfig fixed_pipeline(double lambda1) {
  InferencePipelineConfig cfg;
  cfg.lambda_rule = LambdaRule::Fixed;
  cfg.solver.lambda1 = lambda1;
  cfg.solver.lambda2 = 0.1 * lambda1;
  cfg.solver.lambda_prime = lambda1;
  return cfg;
}

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("mirror statistics follow the sign-times-f composition exactly") {
  Vec t1 = make_vec({2.0, -1.5, 0.5, -0.4});
  Vec t2 = make_vec({1.0, -2.0, -0.8, 0.3});

  MirrorConfig cfg;
  cfg.q = 0.5;
  cfg.f_kind = MirrorKind::Product;
  SelectionResult prod = mirror_select(t1, t2, cfg);
  for (int j = 0; j < 4; ++j) {
    double sgn = (t1[j] * t2[j] > 0) ? 1.0 : ((t1[j] * t2[j] < 0) ? -1.0 : 0.0);
    CHECK(prod.mirror.m_values[j] ==
          doctest::Approx(sgn * std::abs(t1[j]) * std::abs(t2[j])).epsilon(1e-15));
  }

  cfg.f_kind = MirrorKind::Sum;
  SelectionResult sum = mirror_select(t1, t2, cfg);
  for (int j = 0; j < 4; ++j) {
    double sgn = (t1[j] * t2[j] > 0) ? 1.0 : ((t1[j] * t2[j] < 0) ? -1.0 : 0.0);
    CHECK(sum.mirror.m_values[j] ==
          doctest::Approx(sgn * (std::abs(t1[j]) + std::abs(t2[j]))).epsilon(1e-15));
  }
}

TEST_CASE("the hand-worked mirror cutoff example selects the three positives") {
  // M = (+5, +4, +3, -1), q = 0.5: at t = 1 no mass below -1, three above 1,
  // so FDP-hat = 0 and tau = 1.
  Vec t1 = make_vec({5.0, 4.0, 3.0, 1.0});
  Vec t2 = make_vec({1.0, 1.0, 1.0, -1.0});
  MirrorConfig cfg;
  cfg.q = 0.5;
  SelectionResult r = mirror_select(t1, t2, cfg);
  CHECK(r.mirror.tau_q == doctest::Approx(1.0).epsilon(1e-15));
  REQUIRE(r.selected.size() == 3);
  CHECK(r.selected[0] == 0);
  CHECK(r.selected[1] == 1);
  CHECK(r.selected[2] == 2);
  CHECK(r.q == 0.5);
  CHECK(r.method == SelectionMethod::SingleSplit);
}

TEST_CASE("all-negative mirrors select nothing") {
  Vec t1 = make_vec({1.0, 2.0, 0.5});
  Vec t2 = make_vec({-1.0, -0.5, -2.0});
  MirrorConfig cfg;
  cfg.q = 0.3;
  SelectionResult r = mirror_select(t1, t2, cfg);
  CHECK(r.selected.empty());
  // the largest candidate always passes under the 0/0 -> 0 convention, so the
  // cutoff is finite even though nothing clears it
  CHECK(std::isfinite(r.mirror.tau_q));
}

TEST_CASE("a perfectly symmetric mirror pair is never selected at q < 1") {
  Vec t1 = make_vec({2.0, 2.0});
  Vec t2 = make_vec({2.0, -2.0});  // M = (+4, -4)
  MirrorConfig cfg;
  cfg.q = 0.9;
  SelectionResult r = mirror_select(t1, t2, cfg);
  CHECK(r.selected.empty());

  // with a candidate strictly inside, the estimated FDP there is 1 (> q) and
  // the sweep records it
  Vec t1b = make_vec({2.0, 2.0, 0.5});
  Vec t2b = make_vec({2.0, -2.0, 0.6});  // M = (+4, -4, +0.3)
  SelectionResult rb = mirror_select(t1b, t2b, cfg);
  bool saw_inner = false;
  for (const auto& [t, fdp] : rb.mirror.fdp_hat_curve)
    if (t < 4.0 && fdp >= 1.0) saw_inner = true;
  CHECK(saw_inner);
}

TEST_CASE("product mirrors are invariant to common positive rescaling") {
  Rng rng(RngSeed{600, 0});
  for (int trial = 0; trial < 50; ++trial) {
    Vec t1(8), t2(8);
    for (int j = 0; j < 8; ++j) {
      t1[j] = 2.0 * rng.normal();
      t2[j] = 2.0 * rng.normal();
    }
    MirrorConfig cfg;
    cfg.q = 0.2 + 0.6 * rng.uniform01();
    SelectionResult base = mirror_select(t1, t2, cfg);
    double c = 0.1 + 5.0 * rng.uniform01();
    SelectionResult scaled = mirror_select((c * t1).eval(), (c * t2).eval(), cfg);
    CHECK(base.selected == scaled.selected);
  }
}

TEST_CASE("whenever the mirror selection is nonempty its estimated FDP meets the target") {
  Rng rng(RngSeed{601, 0});
  for (int trial = 0; trial < 200; ++trial) {
    int p = 3 + rng.uniform_int(12);
    Vec t1(p), t2(p);
    for (int j = 0; j < p; ++j) {
      t1[j] = 1.5 * rng.normal() + (j < p / 3 ? 2.0 : 0.0);
      t2[j] = 1.5 * rng.normal() + (j < p / 3 ? 2.0 : 0.0);
    }
    MirrorConfig cfg;
    cfg.q = 0.05 + 0.9 * rng.uniform01();
    SelectionResult r = mirror_select(t1, t2, cfg);
    if (r.selected.empty()) continue;
    double tau = r.mirror.tau_q;
    int below = 0, above = 0;
    for (int j = 0; j < p; ++j) {
      if (r.mirror.m_values[j] < -tau) ++below;
      if (r.mirror.m_values[j] > tau) ++above;
    }
    REQUIRE(above == static_cast<int>(r.selected.size()));
    double fdp_hat = above > 0 ? static_cast<double>(below) / above : 0.0;
    CHECK(fdp_hat <= cfg.q);
    // tau is the smallest candidate meeting the bound: every smaller candidate fails
    for (const auto& [t, fdp] : r.mirror.fdp_hat_curve)
      if (t < tau) CHECK(fdp > cfg.q);
  }
}

TEST_CASE("NaN mirror coordinates are excluded from candidates and selection") {
  Vec t1 = make_vec({5.0, 4.0, 3.0, 1.0});
  Vec t2 = make_vec({1.0, 1.0, 1.0, -1.0});
  t1[1] = std::numeric_limits<double>::quiet_NaN();  // coordinate 1 undefined
  MirrorConfig cfg;
  cfg.q = 0.5;
  SelectionResult r = mirror_select(t1, t2, cfg);
  for (int idx : r.selected) CHECK(idx != 1);
  CHECK(std::isnan(r.mirror.m_values[1]));
}

TEST_CASE("mirror_select validates lengths and q") {
  MirrorConfig cfg;
  cfg.q = 0.5;
  CHECK_THROWS_AS(mirror_select(Vec::Zero(3), Vec::Zero(4), cfg), std::invalid_argument);
  MirrorConfig bad_q;
  bad_q.q = 0.0;
  CHECK_THROWS_AS(mirror_select(Vec::Zero(3), Vec::Zero(3), bad_q), std::invalid_argument);
  bad_q.q = 1.0;
  CHECK_THROWS_AS(mirror_select(Vec::Zero(3), Vec::Zero(3), bad_q), std::invalid_argument);
}

TEST_CASE("inclusion-rate selection reproduces the hand-worked prefix example") {
  Vec rates = make_vec({0.5, 0.3, 0.2, 0.0, 0.0});
  SelectionResult r = select_from_inclusion_rates(rates, 0.25);
  CHECK(r.inclusion_threshold == doctest::Approx(0.2).epsilon(1e-15));
  REQUIRE(r.selected.size() == 2);
  CHECK(r.selected[0] == 0);
  CHECK(r.selected[1] == 1);
  CHECK(r.method == SelectionMethod::MultiSplit);
}

TEST_CASE("unanimous singleton splits give that singleton") {
  // I_j = 1 for the winner, 0 elsewhere; prefix of zeros fits any q
  Vec rates = make_vec({0.0, 1.0, 0.0, 0.0});
  SelectionResult r = select_from_inclusion_rates(rates, 0.1);
  CHECK(r.inclusion_threshold == 0.0);
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0] == 1);
}

TEST_CASE("all-empty splits select nothing by strict inequality") {
  Vec rates = Vec::Zero(6);
  SelectionResult r = select_from_inclusion_rates(rates, 0.3);
  CHECK(r.selected.empty());
  CHECK(r.inclusion_threshold == 0.0);
}

TEST_CASE("when even the smallest rate exceeds q the threshold stays at zero") {
  Vec rates = make_vec({0.4, 0.3, 0.3});
  SelectionResult r = select_from_inclusion_rates(rates, 0.25);
  CHECK(r.inclusion_threshold == 0.0);
  CHECK(r.selected.size() == 3);  // everything sits strictly above 0
}

TEST_CASE("e-BH hand fixture: e = (10, 9, 1, 0.1), q = 0.5 keeps the top two") {
  SelectionResult r = ebh_select_values(make_vec({10.0, 9.0, 1.0, 0.1}), 0.5);
  CHECK(r.k_star == 2);
  REQUIRE(r.selected.size() == 2);
  CHECK(r.selected[0] == 0);
  CHECK(r.selected[1] == 1);
  CHECK(r.method == SelectionMethod::EBH);

  // realized threshold inequality: k* e_(k*) / p >= 1/q
  CHECK(2.0 * 9.0 / 4.0 >= 1.0 / 0.5);
}

TEST_CASE("all-zero e-values select nothing") {
  SelectionResult r = ebh_select_values(Vec::Zero(5), 0.4);
  CHECK(r.k_star == 0);
  CHECK(r.selected.empty());
}

TEST_CASE("doubling e-values never shrinks the e-BH selection") {
  Rng rng(RngSeed{602, 0});
  for (int trial = 0; trial < 100; ++trial) {
    int p = 3 + rng.uniform_int(10);
    Vec e(p);
    for (int j = 0; j < p; ++j) e[j] = 6.0 * rng.uniform01();
    double q = 0.05 + 0.8 * rng.uniform01();
    SelectionResult base = ebh_select_values(e, q);
    SelectionResult doubled = ebh_select_values((2.0 * e).eval(), q);
    for (int idx : base.selected)
      CHECK(std::find(doubled.selected.begin(), doubled.selected.end(), idx) !=
            doubled.selected.end());

    // definitional threshold inequality at the realized k*
    if (base.k_star > 0) {
      std::vector<double> sorted(e.data(), e.data() + p);
      std::sort(sorted.begin(), sorted.end(), std::greater<double>());
      CHECK(base.k_star * sorted[static_cast<std::size_t>(base.k_star - 1)] / p >=
            1.0 / q - 1e-12);
    }
  }
}

TEST_CASE("ebh_select_values validates q") {
  CHECK_THROWS_AS(ebh_select_values(Vec::Zero(3), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ebh_select_values(Vec::Zero(3), 1.0), std::invalid_argument);
}

TEST_CASE("full-data e-values follow the scaled one-step magnitude formula") {
  std::vector<InferenceResult> inference(3);
  inference[0].target_index = 0;
  inference[0].h_hat = 0.25;
  inference[0].alpha_tilde = 0.8;
  inference[0].ci_defined = true;
  inference[1].target_index = 1;
  inference[1].h_hat = -0.1;  // degenerate: e-value must be 0
  inference[1].alpha_tilde = std::numeric_limits<double>::quiet_NaN();
  inference[1].ci_defined = false;
  inference[2].target_index = 2;
  inference[2].h_hat = 1.0;
  inference[2].alpha_tilde = 0.05;
  inference[2].ci_defined = true;

  const int n = 400;
  Vec nulls = Vec::Zero(3);
  SelectionResult r = ebh_select(inference, nulls, 0.3, n);
  const double root_half_pi = std::sqrt(2.0 * std::atan(1.0));  // sqrt(pi/2)
  CHECK(r.e_values[0] ==
        doctest::Approx(root_half_pi * std::sqrt(n * 0.25) * 0.8).epsilon(1e-12));
  CHECK(r.e_values[1] == 0.0);
  CHECK(r.e_values[2] ==
        doctest::Approx(root_half_pi * std::sqrt(n * 1.0) * 0.05).epsilon(1e-12));
}

TEST_CASE("split_and_infer is deterministic and centers exactly at the one-step estimates") {
  Toy t = make_toy(6, 60, 300, 700);
  InferencePipelineConfig cfg = fixed_pipeline(0.05);
  Vec nulls = Vec::Zero(6);

  SplitInference a = split_and_infer(t.fm, t.obs, t.ref, cfg, nulls, RngSeed{701, 0});
  SplitInference b = split_and_infer(t.fm, t.obs, t.ref, cfg, nulls, RngSeed{701, 0});
  CHECK(a.half1 == b.half1);
  CHECK(a.half2 == b.half2);
  CHECK(a.t1 == b.t1);
  CHECK(a.t2 == b.t2);

  // halves partition the rows with sizes floor/ceil
  CHECK(a.half1.size() == 30);
  CHECK(a.half2.size() == 30);
  std::vector<int> all = a.half1;
  all.insert(all.end(), a.half2.begin(), a.half2.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 60; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

  // t-statistics match the definitional formula with the FULL n under the root
  const double n_full = 60.0;
  for (int j = 0; j < 6; ++j) {
    const InferenceResult& c1 = a.pipe1.coords[static_cast<std::size_t>(j)];
    if (!c1.ci_defined) continue;
    double expect = (c1.alpha_tilde - nulls[j]) * std::sqrt(n_full * c1.h_hat / 2.0);
    CHECK(a.t1[j] == doctest::Approx(expect).epsilon(1e-12));
  }

  // centering at theta-tilde itself zeroes the statistics
  Vec tilde_nulls(6);
  for (int j = 0; j < 6; ++j)
    tilde_nulls[j] = a.pipe1.coords[static_cast<std::size_t>(j)].alpha_tilde;
  SplitInference c = split_and_infer(t.fm, t.obs, t.ref, cfg, tilde_nulls, RngSeed{701, 0});
  for (int j = 0; j < 6; ++j)
    if (!std::isnan(c.t1[j])) CHECK(std::abs(c.t1[j]) < 1e-10);

  // different seed -> different split
  SplitInference d = split_and_infer(t.fm, t.obs, t.ref, cfg, nulls, RngSeed{702, 0});
  CHECK(d.half1 != a.half1);

  ObservedSample tiny = subset_rows(t.obs, {0, 1, 2});
  CHECK_THROWS_AS(split_and_infer(t.fm, tiny, t.ref, cfg, nulls, RngSeed{1, 0}),
                  std::invalid_argument);
}

TEST_CASE("multi-split aggregation averages reciprocal selection sizes") {
  Toy t = make_toy(6, 80, 300, 800);
  InferencePipelineConfig pipeline = fixed_pipeline(0.04);
  Vec nulls = Vec::Zero(6);

  MirrorConfig cfg;
  cfg.q = 0.3;
  cfg.n_splits = 3;
  SelectionResult multi =
      multi_split_select(t.fm, t.obs, t.ref, cfg, pipeline, nulls, RngSeed{801, 0});
  REQUIRE(multi.inclusion_rates.size() == 6);
  CHECK(multi.method == SelectionMethod::MultiSplit);

  // reproduce the aggregation by hand from the three per-split selections
  Vec rates = Vec::Zero(6);
  for (int k = 0; k < 3; ++k) {
    SplitInference si =
        split_and_infer(t.fm, t.obs, t.ref, pipeline, nulls, RngSeed{801, 0}.sub(4 * k));
    MirrorConfig one;
    one.q = cfg.q;
    one.f_kind = cfg.f_kind;
    SelectionResult sel = mirror_select(si.t1, si.t2, one);
    if (sel.selected.empty()) continue;
    for (int idx : sel.selected)
      rates[idx] += 1.0 / (3.0 * static_cast<double>(sel.selected.size()));
  }
  CHECK((multi.inclusion_rates - rates).cwiseAbs().maxCoeff() < 1e-12);

  SelectionResult direct = select_from_inclusion_rates(rates, cfg.q);
  CHECK(direct.selected == multi.selected);

  MirrorConfig bad = cfg;
  bad.n_splits = 1;
  CHECK_THROWS_AS(multi_split_select(t.fm, t.obs, t.ref, bad, pipeline, nulls, RngSeed{1, 0}),
                  std::invalid_argument);
}

TEST_CASE("under a global null the mirror signs are symmetric across replications") {
  // theta* = 0: each coordinate's two half-statistics are independent and
  // sign-symmetric, so sgn(t1 t2) > 0 with probability 1/2.
  const int p = 4;
  FeatureMap fm = builtin_feature_map(BuiltinFeature::Cos, p, kUnitBox);
  InferencePipelineConfig cfg = fixed_pipeline(0.02);
  Vec nulls = Vec::Zero(p);

  int positive = 0, total = 0;
  for (int rep = 0; rep < 40; ++rep) {
    RngSeed rs{9000 + static_cast<std::uint64_t>(rep), 0};
    ReferenceChain ref = sample_reference_stratified_gaussian(fm, 200, 0.0, 1.0, rs.sub(1));
    MetropolisConfig mcfg;
    mcfg.proposal_sd = 0.5;
    mcfg.burn_in = 200;
    mcfg.thin = 3;
    ObservedSample obs = metropolis_sample(fm, kUnitBox, nulls, 60, mcfg, rs.sub(2));
    SplitInference si = split_and_infer(fm, obs, ref, cfg, nulls, rs.sub(3));
    for (int j = 0; j < p; ++j) {
      if (std::isnan(si.t1[j]) || std::isnan(si.t2[j])) continue;
      ++total;
      if (si.t1[j] * si.t2[j] > 0) ++positive;
    }
  }
  REQUIRE(total >= 120);
  double frac = static_cast<double>(positive) / total;
  // binomial 3-sigma band around 1/2
  double band = 3.0 * std::sqrt(0.25 / total);
  CHECK(frac > 0.5 - band - 0.05);
  CHECK(frac < 0.5 + band + 0.05);
}

TEST_CASE("the fixed lambda rule passes the solver config through unchanged") {
  Toy t = make_toy(4, 40, 150, 900);
  InferencePipelineConfig cfg = fixed_pipeline(0.07);
  PenaltyConfig chosen = choose_penalty(t.fm, t.obs, t.ref, cfg, RngSeed{901, 0});
  CHECK(chosen.lambda1 == 0.07);
  CHECK(chosen.lambda2 == doctest::Approx(0.007).epsilon(1e-15));
  CHECK(chosen.lambda_prime == 0.07);
}

TEST_CASE("the rate formula matches its printed form") {
  Toy t = make_toy(4, 40, 150, 910);
  InferencePipelineConfig cfg;
  cfg.lambda_rule = LambdaRule::RateFormula;
  cfg.rate_constant = 0.3;
  cfg.lambda2_factor = 0.2;
  PenaltyConfig chosen = choose_penalty(t.fm, t.obs, t.ref, cfg, RngSeed{911, 0});
  const double lp = std::log(4.0);
  const double n = 40.0, m = 150.0;
  const double rate = std::sqrt(lp / n) + std::sqrt(lp / m) + lp / m;
  CHECK(chosen.lambda1 == doctest::Approx(0.3 * rate).epsilon(1e-14));
  CHECK(chosen.lambda2 == doctest::Approx(0.2 * chosen.lambda1).epsilon(1e-14));
  CHECK(chosen.lambda_prime == doctest::Approx(chosen.lambda1).epsilon(1e-14));
}
