#ifndef BOSH_NUMERICS_HPP
#define BOSH_NUMERICS_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bosh/random.hpp"

namespace bosh {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// log Phi(x), stable far into the lower tail.
double log_normal_cdf(double x);

// Nodes and weights of a one-dimensional rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Hermite rule for E[h(Z)], Z ~ N(0, 1); weights sum to one.
const QuadratureRule& gauss_hermite_standard(int n);

// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int n);

// Randomly shifted Halton points in [0,1)^d. The shift is drawn once at
// construction, so the sequence is a deterministic function of the rng state.
class HaltonSequence {
 public:
  HaltonSequence(int dim, Rng& rng);
  // Unshifted sequence.
  explicit HaltonSequence(int dim);

  Eigen::VectorXd point(std::size_t index) const;
  std::vector<Eigen::VectorXd> points(std::size_t count) const;

 private:
  int dim_;
  Eigen::VectorXd shift_;
};

struct NelderMeadOptions {
  int max_evaluations = 400;
  double f_tolerance = 1e-8;
  double x_tolerance = 1e-6;
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value;
  int evaluations;
};

// Box-constrained Nelder-Mead minimization. Trial points are projected onto
// the box; non-finite objective values are treated as +infinity. The returned
// value is never worse than the value at the (projected) start.
NelderMeadResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                      const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper,
                                      const NelderMeadOptions& options = {});

// Runs Nelder-Mead from n_restarts starts and keeps the best result. The first
// start is `first` when given, otherwise uniform in the box like the others.
NelderMeadResult multistart_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     int n_restarts, Rng& rng,
                                     const std::optional<Eigen::VectorXd>& first = {},
                                     const NelderMeadOptions& options = {});

}  // namespace bosh

#endif  // BOSH_NUMERICS_HPP
