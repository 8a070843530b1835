#pragma once

#include <functional>

#include "mrfmle/model.hpp"

// Independent brute-force reference implementations used by the test suite
// and the CLI `verify` subcommand. Nothing here shares code with the modules
// it cross-checks.
namespace mrfmle::oracle {

struct FiniteDiffSpec {
  enum class Scheme { Central };

  double step = 1e-5;
  Scheme scheme = Scheme::Central;
  double tol_grad = 1e-6;  // relative, for gradient comparisons
  double tol_hess = 1e-5;  // absolute, for Hessian comparisons
};

// Central-difference gradient of a scalar function.
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& theta,
                const FiniteDiffSpec& spec = {});

// Central-difference Jacobian of a vector function (column j = d f / d theta_j);
// applied to a gradient it yields the finite-difference Hessian.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& theta,
                const FiniteDiffSpec& spec = {});

// Damped Newton iterations until ||grad||_inf <= tol. Reference optimizer for
// smooth (lambda1 = 0) instances at small p.
Vec dense_newton_solve(const std::function<Vec(const Vec&)>& grad,
                       const std::function<Mat(const Vec&)>& hess, const Vec& theta0,
                       double tol, int max_iter = 200);

// Mirror-statistic cutoff by direct counting at every candidate threshold;
// returns +infinity when no candidate meets the target level.
double exhaustive_mirror_cutoff(const Vec& m_values, double q);

// Runs the built-in self-check suite (small, seconds); prints one line per
// check when `verbose`, returns the number of failed checks.
int run_verification_suite(bool verbose);

}  // namespace mrfmle::oracle
