#pragma once

#include <functional>

#include "mrfmle/likelihood.hpp"

namespace mrfmle {

struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda_prime = 0.0;  // l1 level of the nuisance-projection program
  int max_iter = 5000;
  double tol = 1e-8;          // relative objective-change tolerance
  double step_init = 1.0;

  bool valid() const {
    return lambda1 >= 0 && lambda2 >= 0 && lambda_prime >= 0 && tol > 0 && max_iter > 0 &&
           step_init > 0;
  }
};

struct FitResult {
  Vec theta_hat;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  int support_size = 0;
  double ess = 0.0;                    // weight health at the solution
  std::vector<double> objective_trace; // accepted objective per iteration
};

// Componentwise sign(z) * max(|z| - kappa, 0).
Vec soft_threshold(const Vec& z, double kappa);

// Generic accelerated proximal gradient (FISTA) on  g(x) + lambda1 ||x||_1
// with backtracking (halving) line search and a monotone restart: if the
// accelerated step raises the objective it is replaced by a plain proximal
// step from the previous iterate and the momentum sequence restarts.
// Stops when the relative objective change drops below tol AND the KKT
// residual is within 10*tol (or at max_iter / step underflow).
struct SmoothProblem {
  // Returns g(x) and fills grad. `grad` is resized by the engine.
  std::function<double(const Vec&, Vec&)> value_grad;
  // Value-only evaluation used inside the line search (often cheaper).
  std::function<double(const Vec&)> value;
};

FitResult fista_minimize(const SmoothProblem& prob, const Vec& x0, double lambda1,
                         const PenaltyConfig& cfg);

// Subgradient-optimality residual of L + lambda2||.||^2 + lambda1||.||_1
// given the smooth gradient at theta:
//   theta_j != 0:  |grad_j + 2 lambda2 theta_j + lambda1 sign(theta_j)|
//   theta_j == 0:  max(|grad_j + 2 lambda2 theta_j| - lambda1, 0)
double kkt_residual(const Vec& theta, const Vec& smooth_grad_no_ridge, double lambda1,
                    double lambda2);

// Elastic-net penalized MCMC maximum likelihood:
//   theta_hat = argmin L_n^m(theta) + lambda1 ||theta||_1 + lambda2 ||theta||_2^2.
FitResult solve(const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
                const PenaltyConfig& cfg, const Vec& theta_init);

struct CvEntry {
  PenaltyConfig config;
  double mean_heldout_loss = 0.0;
  std::vector<double> fold_losses;
};

// Rate-matched default grid: lambda1 = base * logspace(0.01, 1, 8) with
// base = sqrt(log p / n) + sqrt(log p / m) + log p / m, lambda2 in
// {0.1, 1} * lambda1, lambda_prime = lambda1.
std::vector<PenaltyConfig> default_penalty_grid(int n, int m, int p,
                                                const PenaltyConfig& proto = {});

// K-fold cross-validation over observed rows only (the reference chain is
// shared across folds). Heldout criterion: unpenalized L_n^m on the heldout
// fold at the fold-fitted theta. Ties broken toward larger lambda1, then
// larger lambda2. Every (fold, grid point) cell is fit independently from a
// cold start, so results do not depend on evaluation order.
std::pair<PenaltyConfig, std::vector<CvEntry>> cross_validate(
    const FeatureMap& fm, const ObservedSample& obs, const ReferenceChain& ref,
    const std::vector<PenaltyConfig>& grid, int folds, RngSeed seed);

}  // namespace mrfmle
