#include "mrfmle/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mrfmle {

Vec soft_threshold(const Vec& z, double kappa) {
  return z.unaryExpr([kappa](double v) {
    double a = std::abs(v) - kappa;
    return a > 0.0 ? (v > 0.0 ? a : -a) : 0.0;
  });
}

namespace {

// KKT residual with the ridge already folded into `grad`.
double kkt_from_smooth_grad(const Vec& x, const Vec& grad, double lambda1) {
  double worst = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    double r;
    if (x[j] != 0.0) {
      r = std::abs(grad[j] + lambda1 * (x[j] > 0.0 ? 1.0 : -1.0));
    } else {
      r = std::max(std::abs(grad[j]) - lambda1, 0.0);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

int count_nonzero(const Vec& x) {
  int s = 0;
  for (int j = 0; j < x.size(); ++j) s += (x[j] != 0.0);
  return s;
}

}  // namespace

double kkt_residual(const Vec& theta, const Vec& smooth_grad_no_ridge, double lambda1,
                    double lambda2) {
  Vec g = smooth_grad_no_ridge + 2.0 * lambda2 * theta;
  return kkt_from_smooth_grad(theta, g, lambda1);
}

FitResult fista_minimize(const SmoothProblem& prob, const Vec& x0, double lambda1,
                         const PenaltyConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("fista_minimize: invalid PenaltyConfig");

  FitResult out;
  Vec x = x0;
  Vec grad_y(x.size()), grad_x(x.size());

  double gx = prob.value_grad(x, grad_x);
  if (!std::isfinite(gx)) throw std::runtime_error("fista_minimize: non-finite objective at start");
  double fx = gx + lambda1 * x.lpNorm<1>();

  Vec y = x;
  grad_y = grad_x;
  double gy = gx;
  double t = 1.0;
  double step = cfg.step_init;
  bool step_underflow = false;
  out.objective_trace.reserve(static_cast<size_t>(std::min(cfg.max_iter, 4096)) + 1);
  out.objective_trace.push_back(fx);

  // One backtracked proximal step from `base`; halves `step` until the local
  // quadratic model majorizes the smooth part at the candidate.
  auto prox_step = [&](const Vec& base, const Vec& grad_base, double g_base, Vec& cand,
                       double& g_cand) -> bool {
    for (;;) {
      cand = soft_threshold(base - step * grad_base, step * lambda1);
      Vec diff = cand - base;
      double quad = g_base + grad_base.dot(diff) + diff.squaredNorm() / (2.0 * step);
      g_cand = prob.value(cand);
      if (!std::isfinite(g_cand))
        throw std::runtime_error("fista_minimize: non-finite objective during line search");
      if (g_cand <= quad + 1e-12 * std::max(1.0, std::abs(quad))) return true;
      step *= 0.5;
      if (step < 1e-16) return false;
    }
  };

  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iter; ++it) {
    Vec cand;
    double g_cand;
    if (!prox_step(y, grad_y, gy, cand, g_cand)) {
      step_underflow = true;
      break;
    }
    double f_cand = g_cand + lambda1 * cand.lpNorm<1>();

    if (f_cand > fx) {
      // Momentum overshot: restart with a plain proximal step from x, which
      // the majorization argument guarantees not to increase the objective.
      gx = prob.value_grad(x, grad_x);
      if (!prox_step(x, grad_x, gx, cand, g_cand)) {
        step_underflow = true;
        break;
      }
      f_cand = g_cand + lambda1 * cand.lpNorm<1>();
      t = 1.0;
    }

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Vec x_prev = std::move(x);
    x = cand;
    double f_prev = fx;
    fx = f_cand;
    out.objective_trace.push_back(fx);

    double rel_change = std::abs(f_prev - fx) / std::max(1.0, std::abs(f_prev));
    if (rel_change < cfg.tol) {
      // Cheap condition fired; pay for the optimality certificate.
      gx = prob.value_grad(x, grad_x);
      double kkt = kkt_from_smooth_grad(x, grad_x, lambda1);
      if (kkt <= 10.0 * cfg.tol) {
        out.kkt_residual = kkt;
        converged = true;
        ++it;
        break;
      }
    }

    y = x + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    gy = prob.value_grad(y, grad_y);
  }

  if (!converged) {
    gx = prob.value_grad(x, grad_x);
    out.kkt_residual = kkt_from_smooth_grad(x, grad_x, lambda1);
  }
  out.theta_hat = std::move(x);
  out.objective = fx;
  out.iterations = it;
  out.converged = converged && !step_underflow;
  out.support_size = count_nonzero(out.theta_hat);
  return out;
}

FitResult solve(const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
                const PenaltyConfig& cfg, const Vec& theta_init) {
  if (obs.features.cols() != fm.p || ref.features.cols() != fm.p ||
      theta_init.size() != fm.p) {
    throw std::invalid_argument("solve: dimension mismatch");
  }
  if (!cfg.valid()) throw std::invalid_argument("solve: invalid PenaltyConfig");

  const double lambda2 = cfg.lambda2;
  SmoothProblem prob;
  prob.value_grad = [&obs, &ref, lambda2](const Vec& th, Vec& grad) {
    LikelihoodEval ev = eval_loss_grad(th, obs, ref);
    grad = ev.grad + 2.0 * lambda2 * th;
    return ev.value + lambda2 * th.squaredNorm();
  };
  prob.value = [&obs, &ref, lambda2](const Vec& th) {
    return eval_loss(th, obs, ref) + lambda2 * th.squaredNorm();
  };

  FitResult out = fista_minimize(prob, theta_init, cfg.lambda1, cfg);
  out.ess = WeightWorkspace::compute(ref, out.theta_hat).ess;
  return out;
}

std::vector<PenaltyConfig> default_penalty_grid(int n, int m, int p,
                                                const PenaltyConfig& proto) {
  if (n < 1 || m < 1 || p < 2) throw std::invalid_argument("default_penalty_grid: bad sizes");
  const double lp = std::log(static_cast<double>(p));
  const double base = std::sqrt(lp / n) + std::sqrt(lp / m) + lp / m;

  std::vector<PenaltyConfig> grid;
  grid.reserve(16);
  const int kPoints = 8;
  for (int k = 0; k < kPoints; ++k) {
    double frac = static_cast<double>(k) / (kPoints - 1);
    double mult = std::pow(10.0, -2.0 * (1.0 - frac));  // logspace 0.01 .. 1
    double l1 = base * mult;
    for (double c : {0.1, 1.0}) {
      PenaltyConfig cfg = proto;
      cfg.lambda1 = l1;
      cfg.lambda2 = c * l1;
      cfg.lambda_prime = l1;
      grid.push_back(cfg);
    }
  }
  return grid;
}

std::pair<PenaltyConfig, std::vector<CvEntry>> cross_validate(
    const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
    const std::vector<PenaltyConfig>& grid, int folds, RngSeed seed) {
  const int n = obs.n();
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  if (folds < 2 || folds > n) throw std::invalid_argument("cross_validate: bad fold count");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<CvEntry> table(grid.size());
  for (size_t g = 0; g < grid.size(); ++g) {
    table[g].config = grid[g];
    table[g].fold_losses.assign(static_cast<size_t>(folds), 0.0);
  }

  int start = 0;
  for (int k = 0; k < folds; ++k) {
    int len = n / folds + (k < n % folds ? 1 : 0);
    std::vector<int> held(perm.begin() + start, perm.begin() + start + len);
    std::vector<int> train;
    train.reserve(n - len);
    train.insert(train.end(), perm.begin(), perm.begin() + start);
    train.insert(train.end(), perm.begin() + start + len, perm.end());
    start += len;

    ObservedSample train_obs = subset_rows(obs, train);
    ObservedSample held_obs = subset_rows(obs, held);

    // Each (fold, grid point) cell is fit independently from a cold start so
    // that duplicated configs give bit-identical losses and cells could run
    // in any order.
    for (size_t g = 0; g < grid.size(); ++g) {
      FitResult fit = solve(fm, train_obs, ref, grid[g], Vec::Zero(fm.p));
      table[g].fold_losses[static_cast<size_t>(k)] = eval_loss(fit.theta_hat, held_obs, ref);
    }
  }

  size_t best = 0;
  for (size_t g = 0; g < grid.size(); ++g) {
    double mean = std::accumulate(table[g].fold_losses.begin(), table[g].fold_losses.end(), 0.0) /
                  static_cast<double>(folds);
    table[g].mean_heldout_loss = mean;
    if (g == 0) continue;
    const CvEntry& cur = table[g];
    const CvEntry& winner = table[best];
    bool better = cur.mean_heldout_loss < winner.mean_heldout_loss;
    bool tie = cur.mean_heldout_loss == winner.mean_heldout_loss;
    bool tie_preferred =
        tie && (cur.config.lambda1 > winner.config.lambda1 ||
                (cur.config.lambda1 == winner.config.lambda1 &&
                 cur.config.lambda2 > winner.config.lambda2));
    if (better || tie_preferred) best = g;
  }
  return {table[best].config, table};
}

}  // namespace mrfmle
