#include "mrfmle/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mrfmle {

StateSpace StateSpace::discrete_product(int d, int r, std::vector<double> levels) {
  if (d < 1 || r < 2) throw std::invalid_argument("DiscreteProduct needs d >= 1, r >= 2");
  StateSpace s;
  s.kind = Kind::DiscreteProduct;
  s.d = d;
  s.r = r;
  if (levels.empty()) {
    levels.resize(static_cast<std::size_t>(r));
    for (int k = 0; k < r; ++k) levels[static_cast<std::size_t>(k)] = static_cast<double>(k);
  }
  if (static_cast<int>(levels.size()) != r)
    throw std::invalid_argument("levels must have r entries");
  s.levels = std::move(levels);
  return s;
}

StateSpace StateSpace::continuous_box(int d, double lo, double hi) {
  if (d < 1) throw std::invalid_argument("ContinuousBox needs d >= 1");
  if (!(lo < hi)) throw std::invalid_argument("ContinuousBox needs lo < hi");
  StateSpace s;
  s.kind = Kind::ContinuousBox;
  s.d = d;
  s.lo = lo;
  s.hi = hi;
  return s;
}

std::uint64_t StateSpace::state_count() const {
  if (!discrete()) return 0;
  std::uint64_t count = 1;
  for (int i = 0; i < d; ++i) {
    if (count > (1ull << 63) / static_cast<std::uint64_t>(r)) return 1ull << 63;
    count *= static_cast<std::uint64_t>(r);
  }
  return count;
}

State StateSpace::state_at(std::uint64_t index) const {
  State x(d);
  for (int i = 0; i < d; ++i) {
    x[i] = levels[static_cast<std::size_t>(index % static_cast<std::uint64_t>(r))];
    index /= static_cast<std::uint64_t>(r);
  }
  return x;
}

FeatureMap builtin_feature_map(BuiltinFeature id, int p, const StateSpace& space) {
  if (p < 1) throw std::invalid_argument("feature map needs p >= 1");
  if (space.kind != StateSpace::Kind::ContinuousBox || space.d != 1)
    throw std::invalid_argument("builtin feature maps take a d=1 continuous box");
  FeatureMap fm;
  fm.p = p;
  const double pi = 3.14159265358979323846;
  switch (id) {
    case BuiltinFeature::Cos:
      fm.sup_bound = 1.0;
      fm.eval_into = [p, pi](const State& x, Vec& out) {
        for (int j = 0; j < p; ++j) out[j] = std::cos((j + 1) * x[0] * pi);
      };
      break;
    case BuiltinFeature::Arctan:
      fm.sup_bound = std::max(pi / 2.0, std::abs(std::log(p * std::max(std::abs(space.lo),
                                                                       std::abs(space.hi)) +
                                                          1.0)));
      fm.eval_into = [p](const State& x, Vec& out) {
        for (int j = 0; j + 1 < p; ++j) out[j] = std::atan((j + 1) * x[0]);
        out[p - 1] = std::log(p * x[0] + 1.0);
      };
      break;
    case BuiltinFeature::Rational:
      if (space.lo < 0.0)
        throw std::invalid_argument("Rational features need a nonnegative box");
      fm.sup_bound = 1.0;  // 1/(1+x^j) stays in (0, 1] for x >= 0
      fm.eval_into = [p](const State& x, Vec& out) {
        for (int j = 0; j < p; ++j) out[j] = 1.0 / (1.0 + std::pow(x[0], j + 1));
      };
      break;
    default:
      throw std::invalid_argument("unknown builtin feature map");
  }
  return fm;
}

BuiltinFeature builtin_feature_from_name(const std::string& name) {
  if (name == "phi1" || name == "cos") return BuiltinFeature::Cos;
  if (name == "phi2" || name == "arctan") return BuiltinFeature::Arctan;
  if (name == "phi3" || name == "rational") return BuiltinFeature::Rational;
  throw std::invalid_argument("unknown scenario name: " + name);
}

FeatureMap pairwise_feature_map(const StateSpace& space) {
  if (!space.discrete()) throw std::invalid_argument("pairwise features need a discrete space");
  const int d = space.d;
  FeatureMap fm;
  fm.p = d * (d - 1) / 2;
  double bound = 0.0;
  for (double a : space.levels) bound = std::max(bound, std::abs(a));
  fm.sup_bound = bound * bound;
  fm.eval_into = [d](const State& x, Vec& out) {
    int idx = 0;
    for (int j = 0; j < d; ++j)
      for (int k = j + 1; k < d; ++k) out[idx++] = x[j] * x[k];
  };
  return fm;
}

double log_density_unnormalized(const FeatureMap& fm, const Vec& theta, const State& x) {
  if (theta.size() != fm.p) throw std::invalid_argument("theta/feature dimension mismatch");
  return theta.dot(fm.eval(x));
}

double brute_force_log_C(const FeatureMap& fm, const Vec& theta, const StateSpace& space) {
  if (!space.enumerable()) throw std::invalid_argument("state space is not enumerable");
  if (theta.size() != fm.p) throw std::invalid_argument("theta/feature dimension mismatch");
  const std::uint64_t count = space.state_count();
  // Streaming log-sum-exp: rescale the accumulator whenever a new max appears.
  double max_val = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  Vec phi(fm.p);
  for (std::uint64_t i = 0; i < count; ++i) {
    fm.eval_into(space.state_at(i), phi);
    double v = theta.dot(phi);
    if (v <= max_val) {
      acc += std::exp(v - max_val);
    } else {
      acc = acc * std::exp(max_val - v) + 1.0;
      max_val = v;
    }
  }
  return max_val + std::log(acc);
}

std::pair<Vec, Mat> brute_force_moments(const FeatureMap& fm, const Vec& theta,
                                        const StateSpace& space) {
  const double log_c = brute_force_log_C(fm, theta, space);
  const std::uint64_t count = space.state_count();
  Vec mean = Vec::Zero(fm.p);
  Mat second = Mat::Zero(fm.p, fm.p);
  Vec phi(fm.p);
  for (std::uint64_t i = 0; i < count; ++i) {
    fm.eval_into(space.state_at(i), phi);
    double prob = std::exp(theta.dot(phi) - log_c);
    mean.noalias() += prob * phi;
    second.noalias() += prob * (phi * phi.transpose());
  }
  Mat cov = second - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {mean, cov};
}

}  // namespace mrfmle
