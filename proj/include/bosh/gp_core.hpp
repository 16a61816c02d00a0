#ifndef BOSH_GP_CORE_HPP
#define BOSH_GP_CORE_HPP

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bosh/random.hpp"

namespace bosh {

using Point = Eigen::VectorXd;

// Matern 5/2 kernel parameters. Inputs are assumed normalized to [0,1]^d.
struct KernelParams {
  std::vector<double> lengthscales;
  double variance = 1.0;

  void validate() const;
  std::size_t dim() const { return lengthscales.size(); }
};

// sqrt(sum_i ((x_i - x2_i) / l_i)^2)
double scaled_distance(const Point& x, const Point& x2, std::span<const double> lengthscales);

// v (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)
double matern52_from_distance(double r, double variance);

double matern52(const Point& x, const Point& x2, const KernelParams& params);

Eigen::MatrixXd matern52_matrix(const std::vector<Point>& inputs, const KernelParams& params);

// Jitter added to the diagonal, in order, after a failed plain factorization.
inline constexpr double kJitterLadder[] = {1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

// Cholesky factor of a symmetric positive definite matrix. Construction walks
// the jitter ladder and throws FitError reporting the last jitter tried.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const Eigen::MatrixXd& matrix);

  Eigen::Index size() const { return lower_.rows(); }
  const Eigen::MatrixXd& lower() const { return lower_; }
  double jitter() const { return jitter_; }

  // A^{-1} b
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // L^{-1} b
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;
  double log_determinant() const;
  // L L^T, i.e. the (jittered) matrix that was factorized.
  Eigen::MatrixXd reconstruct() const;

 private:
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

// -1/2 y^T A^{-1} y - 1/2 log|A| - n/2 log 2 pi, for A = L L^T.
double gaussian_log_likelihood(const CholeskyFactor& factor, const Eigen::VectorXd& targets);

struct Prediction {
  double mean;
  double variance;
};

// Zero-mean GP conditioned on noisy observations. Immutable once built.
class GPPosterior {
 public:
  GPPosterior(std::vector<Point> inputs, Eigen::VectorXd targets, KernelParams params, double noise);

  Prediction predict(const Point& x) const;

  // Posterior covariance of the latent values (or, with include_noise, of fresh
  // noisy observations) at the given points.
  Eigen::MatrixXd predictive_covariance(const std::vector<Point>& points, bool include_noise) const;

  const std::vector<Point>& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const KernelParams& params() const { return params_; }
  double noise() const { return noise_; }
  const CholeskyFactor& factor() const { return factor_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  std::size_t dim() const { return params_.dim(); }

 private:
  Eigen::VectorXd cross_covariance(const Point& x) const;

  std::vector<Point> inputs_;
  Eigen::VectorXd targets_;
  KernelParams params_;
  double noise_;
  CholeskyFactor factor_;
  Eigen::VectorXd alpha_;
};

GPPosterior fit_gp(const std::vector<Point>& inputs, const Eigen::VectorXd& targets,
                   const KernelParams& params, double noise);

double log_marginal_likelihood(const std::vector<Point>& inputs, const Eigen::VectorXd& targets,
                               const KernelParams& params, double noise);

// Box bounds on hyperparameters (natural scale; the search runs on logs).
struct HyperparameterBounds {
  double lengthscale_lo = 1e-2;
  double lengthscale_hi = 10.0;
  double variance_lo = 1e-4;
  double variance_hi = 1e2;
  double noise_lo = 1e-6;
  double noise_hi = 1.0;

  void validate() const;
};

struct GPHyperparameters {
  KernelParams kernel;
  double noise = 1e-2;
  double log_likelihood = 0.0;
};

// Maximizes the log marginal likelihood over (log lengthscales, log variance,
// log noise) with Nelder-Mead from n_restarts starts. With a warm start the
// first start is the warm start, the remaining ones are uniform in the box.
GPHyperparameters optimize_hyperparameters(const std::vector<Point>& inputs,
                                           const Eigen::VectorXd& targets,
                                           const HyperparameterBounds& bounds, int n_restarts,
                                           Rng& rng,
                                           const std::optional<GPHyperparameters>& warm_start = {});

}  // namespace bosh

#endif  // BOSH_GP_CORE_HPP
