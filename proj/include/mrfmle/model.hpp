#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mrfmle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// A state is a point of the sample space: level values for discrete product
// spaces, coordinates for continuous boxes. Stored as doubles either way.
using State = Eigen::VectorXd;

// Sample space of the random field. DiscreteProduct is {levels}^d and can be
// enumerated exactly when r^d stays under the cap; ContinuousBox is [lo,hi]^d
// and is only ever sampled, never enumerated.
struct StateSpace {
  enum class Kind { DiscreteProduct, ContinuousBox };
  static constexpr std::uint64_t enumeration_cap = 1ull << 20;

  Kind kind = Kind::ContinuousBox;
  int d = 1;
  int r = 2;                    // states per vertex (discrete)
  std::vector<double> levels;   // level values, size r (discrete)
  double lo = 0.0, hi = 1.0;    // bounds (continuous)

  static StateSpace discrete_product(int d, int r, std::vector<double> levels = {});
  static StateSpace continuous_box(int d, double lo, double hi);

  bool discrete() const { return kind == Kind::DiscreteProduct; }
  // r^d, saturating at 2^63 to keep the cap comparison safe.
  std::uint64_t state_count() const;
  bool enumerable() const { return discrete() && state_count() <= enumeration_cap; }
  // Mixed-radix decoding of an enumeration index into level values.
  State state_at(std::uint64_t index) const;
};

// Sufficient statistic phi: state -> R^p with a declared sup-norm bound.
struct FeatureMap {
  int p = 0;
  double sup_bound = 1.0;
  std::function<void(const State&, Vec&)> eval_into;

  Vec eval(const State& x) const {
    Vec out(p);
    eval_into(x, out);
    return out;
  }
};

enum class BuiltinFeature { Cos, Arctan, Rational };

// The three scalar-input feature families used by the simulation study:
//   Cos:      phi_j(x) = cos(j * x * pi), j = 1..p
//   Arctan:   phi_j(x) = arctan(j * x) for j < p, last coordinate log(p*x + 1)
//             (the last coordinate switches family exactly as printed)
//   Rational: phi_j(x) = 1 / (1 + x^j)
// The space fixes the sup bound (and must be a d=1 box for these).
FeatureMap builtin_feature_map(BuiltinFeature id, int p, const StateSpace& space);
BuiltinFeature builtin_feature_from_name(const std::string& name);

// Pairwise-interaction features phi_(j,k)(x) = x_j * x_k over all j < k;
// with +-1 levels this is the classic Ising sufficient statistic.
FeatureMap pairwise_feature_map(const StateSpace& space);

// theta' phi(x), no normalization.
double log_density_unnormalized(const FeatureMap& fm, const Vec& theta, const State& x);

// Exact log normalizing constant by full enumeration (log-sum-exp stabilized).
double brute_force_log_C(const FeatureMap& fm, const Vec& theta, const StateSpace& space);

// Exact E[phi(X)] and cov(phi(X)) under p(.|theta) by enumeration.
std::pair<Vec, Mat> brute_force_moments(const FeatureMap& fm, const Vec& theta,
                                        const StateSpace& space);

}  // namespace mrfmle
