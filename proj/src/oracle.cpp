#include "mrfmle/oracle.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mrfmle/fdr.hpp"

namespace mrfmle::oracle {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& theta,
                const FiniteDiffSpec& spec) {
  const int p = static_cast<int>(theta.size());
  Vec g(p);
  Vec shifted = theta;
  for (int j = 0; j < p; ++j) {
    shifted[j] = theta[j] + spec.step;
    double up = f(shifted);
    shifted[j] = theta[j] - spec.step;
    double down = f(shifted);
    shifted[j] = theta[j];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("fd_gradient: non-finite evaluation");
    g[j] = (up - down) / (2.0 * spec.step);
  }
  return g;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& theta,
                const FiniteDiffSpec& spec) {
  const int p = static_cast<int>(theta.size());
  Mat jac;
  Vec shifted = theta;
  for (int j = 0; j < p; ++j) {
    shifted[j] = theta[j] + spec.step;
    Vec up = f(shifted);
    shifted[j] = theta[j] - spec.step;
    Vec down = f(shifted);
    shifted[j] = theta[j];
    if (!up.allFinite() || !down.allFinite())
      throw std::runtime_error("fd_jacobian: non-finite evaluation");
    if (jac.size() == 0) jac.resize(up.size(), p);
    jac.col(j) = (up - down) / (2.0 * spec.step);
  }
  return jac;
}

Vec dense_newton_solve(const std::function<Vec(const Vec&)>& grad,
                       const std::function<Mat(const Vec&)>& hess, const Vec& theta0,
                       double tol, int max_iter) {
  if (theta0.size() > 50) throw std::invalid_argument("dense_newton_solve: p too large");
  Vec x = theta0;
  Vec g = grad(x);
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) return x;
    Mat h = hess(x);
    Vec dir;
    double ridge = 0.0;
    for (;;) {
      Mat damped = h;
      if (ridge > 0.0) damped.diagonal().array() += ridge;
      Eigen::LDLT<Mat> ldlt(damped);
      dir = ldlt.solve(-g);
      if (ldlt.info() == Eigen::Success && dir.allFinite()) break;
      ridge = ridge == 0.0 ? 1e-10 : ridge * 10.0;
      if (ridge > 1e6) throw std::runtime_error("dense_newton_solve: singular Hessian");
    }
    // Damping on the gradient-norm merit.
    double g_norm = g.lpNorm<Eigen::Infinity>();
    double s = 1.0;
    for (;;) {
      Vec trial = x + s * dir;
      Vec g_trial = grad(trial);
      if (g_trial.allFinite() && g_trial.lpNorm<Eigen::Infinity>() < g_norm) {
        x = trial;
        g = g_trial;
        break;
      }
      s *= 0.5;
      if (s < 1e-8) throw std::runtime_error("dense_newton_solve: no descent step");
    }
  }
  if (g.lpNorm<Eigen::Infinity>() <= tol) return x;
  throw std::runtime_error("dense_newton_solve: iteration cap reached");
}

double exhaustive_mirror_cutoff(const Vec& m_values, double q) {
  const int p = static_cast<int>(m_values.size());
  std::vector<double> cands;
  for (int j = 0; j < p; ++j) {
    if (std::isfinite(m_values[j])) cands.push_back(std::abs(m_values[j]));
  }
  std::sort(cands.begin(), cands.end());
  for (double c : cands) {
    int neg = 0, pos = 0;
    for (int j = 0; j < p; ++j) {
      if (m_values[j] < -c) ++neg;
      if (m_values[j] > c) ++pos;
    }
    double fdp;
    if (pos == 0) {
      fdp = neg == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      fdp = static_cast<double>(neg) / static_cast<double>(pos);
    }
    if (fdp <= q) return c;
  }
  return std::numeric_limits<double>::infinity();
}

namespace {

struct Check {
  const char* name;
  std::function<bool()> run;
};

// Small shared instance: d=1 box, cosine features, exact-stratified reference,
// Metropolis-observed data.
struct ToyInstance {
  StateSpace space;
  FeatureMap fm;
  ReferenceChain ref;
  ObservedSample obs;
  Vec theta;
};

ToyInstance make_toy(int p, int n, int m, std::uint64_t seed) {
  ToyInstance t;
  t.space = StateSpace::continuous_box(1, 0.0, 1.0);
  t.fm = builtin_feature_map(BuiltinFeature::Cos, p, t.space);
  t.ref = sample_reference_stratified_gaussian(t.fm, m, 0.0, 1.0, RngSeed{seed, 1});
  Rng rng(RngSeed{seed, 2});
  t.theta = Vec::Zero(p);
  for (int j = 0; j < p; ++j) t.theta[j] = 0.4 * rng.normal();
  MetropolisConfig mc{0.5, 300, 5};
  t.obs = metropolis_sample(t.fm, t.space, t.theta, n, mc, RngSeed{seed, 3});
  return t;
}

bool approx(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

int run_verification_suite(bool verbose) {
  std::vector<Check> checks;

  checks.push_back({"soft_threshold matches 1-d grid minimizer", [] {
    Rng rng(RngSeed{11, 0});
    for (int trial = 0; trial < 20; ++trial) {
      double z = 3.0 * rng.normal();
      double kappa = std::abs(rng.normal());
      Vec zv(1);
      zv[0] = z;
      double got = soft_threshold(zv, kappa)[0];
      double best_u = 0.0, best_v = std::numeric_limits<double>::infinity();
      for (double u = -6.0; u <= 6.0; u += 1e-4) {
        double v = 0.5 * (u - z) * (u - z) + kappa * std::abs(u);
        if (v < best_v) {
          best_v = v;
          best_u = u;
        }
      }
      if (!approx(got, best_u, 2e-4)) return false;
    }
    return true;
  }});

  checks.push_back({"fd_gradient exact on quadratic", [] {
    auto f = [](const Vec& x) { return x.squaredNorm(); };
    Vec at(2);
    at << 1.0, 2.0;
    Vec g = fd_gradient(f, at);
    return approx(g[0], 2.0, 1e-8) && approx(g[1], 4.0, 1e-8);
  }});

  checks.push_back({"loss gradient matches finite differences", [] {
    ToyInstance t = make_toy(4, 50, 300, 21);
    auto f = [&](const Vec& th) { return eval_loss(th, t.obs, t.ref); };
    Vec fd = fd_gradient(f, t.theta);
    Vec g = eval_grad(t.theta, t.obs, t.ref);
    double rel = (g - fd).lpNorm<Eigen::Infinity>() /
                 std::max(1.0, g.lpNorm<Eigen::Infinity>());
    return rel <= 1e-6;
  }});

  checks.push_back({"loss Hessian matches finite differences", [] {
    ToyInstance t = make_toy(4, 50, 300, 22);
    auto g = [&](const Vec& th) { return eval_grad(th, t.obs, t.ref); };
    Mat fd = fd_jacobian(g, t.theta);
    Mat h = eval_hess(t.theta, t.ref);
    return (h - fd).cwiseAbs().maxCoeff() <= 1e-5;
  }});

  checks.push_back({"Hessian-vector product matches dense Hessian", [] {
    ToyInstance t = make_toy(5, 40, 300, 23);
    Mat h = eval_hess(t.theta, t.ref);
    Rng rng(RngSeed{23, 9});
    Vec v(5);
    for (int j = 0; j < 5; ++j) v[j] = rng.normal();
    Vec hv = hess_vector_product(t.theta, t.ref, v);
    return (hv - h * v).lpNorm<Eigen::Infinity>() <= 1e-10;
  }});

  checks.push_back({"normalizer estimate matches enumeration", [] {
    StateSpace space = StateSpace::discrete_product(3, 2, {-1.0, 1.0});
    FeatureMap fm = pairwise_feature_map(space);
    Vec theta(3);
    theta << 0.3, -0.2, 0.5;
    ReferenceChain ref = sample_reference_uniform_discrete(fm, space, 20000, RngSeed{31, 0});
    double est = log_c_estimate(theta, ref);
    double exact = brute_force_log_C(fm, theta, space);
    return approx(est, exact, 0.02);
  }});

  checks.push_back({"smooth solve matches dense Newton", [] {
    ToyInstance t = make_toy(3, 40, 300, 41);
    const double lambda2 = 0.05;
    PenaltyConfig cfg;
    cfg.lambda2 = lambda2;
    FitResult fit = solve(t.fm, t.obs, t.ref, cfg, Vec::Zero(3));
    auto grad = [&](const Vec& th) {
      return Vec(eval_grad(th, t.obs, t.ref) + 2.0 * lambda2 * th);
    };
    auto hess = [&](const Vec& th) {
      Mat h = eval_hess(th, t.ref);
      h.diagonal().array() += 2.0 * lambda2;
      return h;
    };
    Vec ref_sol = dense_newton_solve(grad, hess, Vec::Zero(3), 1e-10);
    return (fit.theta_hat - ref_sol).lpNorm<Eigen::Infinity>() <= 1e-6;
  }});

  checks.push_back({"nuisance projection matches dense linear solve", [] {
    ToyInstance t = make_toy(3, 40, 400, 42);
    Mat h = eval_hess(t.theta, t.ref);
    CurvatureOperator curv = CurvatureOperator::at(t.ref, t.theta);
    Vec e0 = Vec::Zero(3);
    e0[0] = 1.0;
    Vec col = curv.apply(e0);
    PenaltyConfig cfg;
    FitResult w = fit_w_hat_quadratic(curv, col, 0, 0.0, cfg, 1.0 / curv.operator_norm());
    Mat hbb = h.block(1, 1, 2, 2);
    Vec hab = h.block(1, 0, 2, 1);
    Vec dense = hbb.ldlt().solve(hab);
    return (w.theta_hat - dense).lpNorm<Eigen::Infinity>() <= 1e-6;
  }});

  checks.push_back({"mirror cutoff agrees with exhaustive sweep", [] {
    Rng rng(RngSeed{51, 0});
    for (int trial = 0; trial < 50; ++trial) {
      int p = 3 + rng.uniform_int(40);
      Vec t1(p), t2(p);
      for (int j = 0; j < p; ++j) {
        t1[j] = rng.normal() + (rng.uniform01() < 0.2 ? 3.0 : 0.0);
        t2[j] = rng.normal() + (rng.uniform01() < 0.2 ? 3.0 : 0.0);
      }
      MirrorConfig cfg;
      cfg.q = 0.05 + 0.9 * rng.uniform01();
      SelectionResult sel = mirror_select(t1, t2, cfg);
      double tau = exhaustive_mirror_cutoff(sel.mirror.m_values, cfg.q);
      bool same = (std::isinf(sel.mirror.tau_q) && std::isinf(tau)) ||
                  approx(sel.mirror.tau_q, tau, 0.0);
      if (!same) return false;
    }
    return true;
  }});

  checks.push_back({"mirror hand example", [] {
    Vec t1(4), t2(4);
    t1 << 5.0, 4.0, 3.0, -1.0;
    t2 << 1.0, 1.0, 1.0, 1.0;
    MirrorConfig cfg;
    cfg.q = 0.5;
    SelectionResult sel = mirror_select(t1, t2, cfg);
    return sel.mirror.tau_q == 1.0 && sel.selected == std::vector<int>{0, 1, 2};
  }});

  checks.push_back({"e-value hand example", [] {
    Vec e(4);
    e << 10.0, 9.0, 1.0, 0.1;
    SelectionResult sel = ebh_select_values(e, 0.5);
    return sel.k_star == 2 && sel.selected == std::vector<int>{0, 1};
  }});

  checks.push_back({"inclusion-rate hand example", [] {
    Vec rates(5);
    rates << 0.5, 0.3, 0.2, 0.0, 0.0;
    SelectionResult sel = select_from_inclusion_rates(rates, 0.25);
    return sel.inclusion_threshold == 0.2 && sel.selected == std::vector<int>{0, 1};
  }});

  int failed = 0;
  for (const Check& c : checks) {
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      if (verbose) std::printf("FAIL %s (exception: %s)\n", c.name, e.what());
      ++failed;
      continue;
    }
    if (verbose) std::printf("%s %s\n", ok ? "ok  " : "FAIL", c.name);
    if (!ok) ++failed;
  }
  return failed;
}

}  // namespace mrfmle::oracle
