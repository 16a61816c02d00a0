#include "bosh/gp_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bosh/errors.hpp"
#include "bosh/numerics.hpp"

namespace bosh {

void KernelParams::validate() const {
  BOSH_EXPECT(!lengthscales.empty(), "kernel needs at least one lengthscale");
  for (double l : lengthscales) BOSH_EXPECT(l > 0.0 && std::isfinite(l), "lengthscales must be positive");
  BOSH_EXPECT(variance > 0.0 && std::isfinite(variance), "kernel variance must be positive");
}

double scaled_distance(const Point& x, const Point& x2, std::span<const double> lengthscales) {
  BOSH_EXPECT(x.size() == x2.size() && static_cast<std::size_t>(x.size()) == lengthscales.size(),
              "kernel input dimension mismatch");
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = (x(i) - x2(i)) / lengthscales[i];
    r2 += t * t;
  }
  return std::sqrt(r2);
}

double matern52_from_distance(double r, double variance) {
  constexpr double kSqrt5 = 2.23606797749978969641;
  const double s = kSqrt5 * r;
  return variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern52(const Point& x, const Point& x2, const KernelParams& params) {
  params.validate();
  return matern52_from_distance(scaled_distance(x, x2, params.lengthscales), params.variance);
}

Eigen::MatrixXd matern52_matrix(const std::vector<Point>& inputs, const KernelParams& params) {
  params.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = params.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = matern52_from_distance(
          scaled_distance(inputs[i], inputs[j], params.lengthscales), params.variance);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

CholeskyFactor::CholeskyFactor(const Eigen::MatrixXd& matrix) {
  BOSH_EXPECT(matrix.rows() == matrix.cols(), "Cholesky needs a square matrix");
  if (!matrix.allFinite()) throw FitError("matrix to factorize has non-finite entries", 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() == Eigen::Success) {
    lower_ = llt.matrixL();
    return;
  }
  const Eigen::Index n = matrix.rows();
  for (double jitter : kJitterLadder) {
    llt.compute(matrix + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }
  const double last = kJitterLadder[std::size(kJitterLadder) - 1];
  throw FitError("matrix not positive definite after jitter " + std::to_string(last), last);
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::VectorXd CholeskyFactor::solve_lower(const Eigen::VectorXd& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

double CholeskyFactor::log_determinant() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::MatrixXd CholeskyFactor::reconstruct() const { return lower_ * lower_.transpose(); }

double gaussian_log_likelihood(const CholeskyFactor& factor, const Eigen::VectorXd& targets) {
  const Eigen::VectorXd w = factor.solve_lower(targets);
  const double n = static_cast<double>(targets.size());
  return -0.5 * w.squaredNorm() - 0.5 * factor.log_determinant() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

GPPosterior::GPPosterior(std::vector<Point> inputs, Eigen::VectorXd targets, KernelParams params,
                         double noise)
    : inputs_(std::move(inputs)), targets_(std::move(targets)), params_(std::move(params)), noise_(noise) {
  params_.validate();
  BOSH_EXPECT(!inputs_.empty(), "fit_gp needs at least one observation");
  BOSH_EXPECT(static_cast<Eigen::Index>(inputs_.size()) == targets_.size(), "inputs/targets size mismatch");
  BOSH_EXPECT(noise_ > 0.0 && std::isfinite(noise_), "noise must be positive");
  for (const Point& x : inputs_)
    BOSH_EXPECT(static_cast<std::size_t>(x.size()) == params_.dim(), "input dimension mismatch");

  Eigen::MatrixXd k = matern52_matrix(inputs_, params_);
  k.diagonal().array() += noise_;
  factor_ = CholeskyFactor(k);
  alpha_ = factor_.solve(targets_);
}

Eigen::VectorXd GPPosterior::cross_covariance(const Point& x) const {
  BOSH_EXPECT(static_cast<std::size_t>(x.size()) == dim(), "query dimension mismatch");
  Eigen::VectorXd k(inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    k(i) = matern52_from_distance(scaled_distance(x, inputs_[i], params_.lengthscales), params_.variance);
  return k;
}

Prediction GPPosterior::predict(const Point& x) const {
  const Eigen::VectorXd k = cross_covariance(x);
  const Eigen::VectorXd v = factor_.solve_lower(k);
  const double var = params_.variance - v.squaredNorm();
  return {k.dot(alpha_), std::max(var, 0.0)};
}

Eigen::MatrixXd GPPosterior::predictive_covariance(const std::vector<Point>& points,
                                                   bool include_noise) const {
  const Eigen::Index b = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd whitened(factor_.size(), b);
  for (Eigen::Index j = 0; j < b; ++j) whitened.col(j) = factor_.solve_lower(cross_covariance(points[j]));
  Eigen::MatrixXd cov = matern52_matrix(points, params_) - whitened.transpose() * whitened;
  if (include_noise) cov.diagonal().array() += noise_;
  return 0.5 * (cov + cov.transpose());
}

GPPosterior fit_gp(const std::vector<Point>& inputs, const Eigen::VectorXd& targets,
                   const KernelParams& params, double noise) {
  return GPPosterior(inputs, targets, params, noise);
}

double log_marginal_likelihood(const std::vector<Point>& inputs, const Eigen::VectorXd& targets,
                               const KernelParams& params, double noise) {
  BOSH_EXPECT(!inputs.empty(), "likelihood needs at least one observation");
  BOSH_EXPECT(static_cast<Eigen::Index>(inputs.size()) == targets.size(), "inputs/targets size mismatch");
  BOSH_EXPECT(noise > 0.0, "noise must be positive");
  Eigen::MatrixXd k = matern52_matrix(inputs, params);
  k.diagonal().array() += noise;
  return gaussian_log_likelihood(CholeskyFactor(k), targets);
}

void HyperparameterBounds::validate() const {
  BOSH_EXPECT(0.0 < lengthscale_lo && lengthscale_lo <= lengthscale_hi, "bad lengthscale bounds");
  BOSH_EXPECT(0.0 < variance_lo && variance_lo <= variance_hi, "bad variance bounds");
  BOSH_EXPECT(0.0 < noise_lo && noise_lo <= noise_hi, "bad noise bounds");
}

GPHyperparameters optimize_hyperparameters(const std::vector<Point>& inputs,
                                           const Eigen::VectorXd& targets,
                                           const HyperparameterBounds& bounds, int n_restarts,
                                           Rng& rng,
                                           const std::optional<GPHyperparameters>& warm_start) {
  bounds.validate();
  BOSH_EXPECT(!inputs.empty(), "hyperparameter fit needs data");
  const Eigen::Index d = inputs.front().size();
  // Layout: [log l_1..l_d, log variance, log noise]
  Eigen::VectorXd lower(d + 2), upper(d + 2);
  lower.head(d).setConstant(std::log(bounds.lengthscale_lo));
  upper.head(d).setConstant(std::log(bounds.lengthscale_hi));
  lower(d) = std::log(bounds.variance_lo);
  upper(d) = std::log(bounds.variance_hi);
  lower(d + 1) = std::log(bounds.noise_lo);
  upper(d + 1) = std::log(bounds.noise_hi);

  auto unpack = [d](const Eigen::VectorXd& theta) {
    KernelParams kp;
    kp.lengthscales.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) kp.lengthscales[i] = std::exp(theta(i));
    kp.variance = std::exp(theta(d));
    return std::pair{kp, std::exp(theta(d + 1))};
  };
  auto negative_ll = [&](const Eigen::VectorXd& theta) {
    auto [kp, noise] = unpack(theta);
    try {
      return -log_marginal_likelihood(inputs, targets, kp, noise);
    } catch (const FitError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::optional<Eigen::VectorXd> first;
  if (warm_start) {
    Eigen::VectorXd theta(d + 2);
    for (Eigen::Index i = 0; i < d; ++i) theta(i) = std::log(warm_start->kernel.lengthscales.at(i));
    theta(d) = std::log(warm_start->kernel.variance);
    theta(d + 1) = std::log(warm_start->noise);
    first = theta.cwiseMax(lower).cwiseMin(upper);
  }

  const NelderMeadResult best = multistart_minimize(negative_ll, lower, upper, n_restarts, rng, first);
  if (!std::isfinite(best.value)) throw FitError("no hyperparameter candidate could be evaluated");
  auto [kp, noise] = unpack(best.x);
  return {kp, noise, -best.value};
}

}  // namespace bosh
