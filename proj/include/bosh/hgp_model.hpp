#ifndef BOSH_HGP_MODEL_HPP
#define BOSH_HGP_MODEL_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bosh/gp_core.hpp"
#include "bosh/random.hpp"

namespace bosh {

// Identifies which function a value belongs to: a member of the evaluation
// pool, a not-yet-instantiated realization, or the latent objective g.
// Two fresh ids are the same realization only when their handles match.
class RealizationId {
 public:
  enum class Kind : std::uint8_t { kMember, kFresh, kLatent };

  static RealizationId member(std::uint32_t index) { return {Kind::kMember, index}; }
  static RealizationId fresh(std::uint32_t handle = 0) { return {Kind::kFresh, handle}; }
  static RealizationId latent() { return {Kind::kLatent, 0}; }

  Kind kind() const { return kind_; }
  std::uint32_t index() const { return index_; }
  bool is_member() const { return kind_ == Kind::kMember; }
  bool is_fresh() const { return kind_ == Kind::kFresh; }
  bool is_latent() const { return kind_ == Kind::kLatent; }

  // "3" for pool members, "new" / "new2" for fresh ids, "g" for the latent.
  std::string to_string() const;

  friend bool operator==(const RealizationId&, const RealizationId&) = default;

 private:
  RealizationId(Kind kind, std::uint32_t index) : kind_(kind), index_(index) {}

  Kind kind_;
  std::uint32_t index_;
};

// Realizations instantiated so far; ids are dense 0..K-1 and never removed.
// Each member carries the benchmark-side handle used to evaluate it.
class EvaluationPool {
 public:
  RealizationId add(std::uint64_t benchmark_handle);

  std::size_t size() const { return handles_.size(); }
  bool contains(RealizationId s) const { return s.is_member() && s.index() < handles_.size(); }
  std::uint64_t handle(RealizationId s) const;
  std::vector<RealizationId> members() const;

 private:
  std::vector<std::uint64_t> handles_;
};

// Lengthscales are shared between the upper kernel k_g and the lower kernel k_f.
struct HGPParams {
  std::vector<double> lengthscales;
  double upper_variance = 1.0;
  double lower_variance = 0.1;
  double noise = 1e-2;

  void validate() const;
  std::size_t dim() const { return lengthscales.size(); }
  KernelParams upper_kernel() const { return {lengthscales, upper_variance}; }
  KernelParams lower_kernel() const { return {lengthscales, lower_variance}; }
};

struct Observation {
  Point x;
  RealizationId s;
  double y;
};

// z = (x, s): a location on a realization.
struct EvaluationPoint {
  Point x;
  RealizationId s;
};

// Prior covariance k_g(x,x2) + [s == s2] k_f(x,x2). The latent tag only ever
// picks up k_g, which gives Cov(f_s(x), g(x2)) = k_g(x, x2).
double hgp_cov(const Point& x, RealizationId s, const Point& x2, RealizationId s2,
               const HGPParams& params);

// Joint Gaussian belief over (y_s(x), g(x)).
struct BivariateBelief {
  double mean_y;
  double mean_g;
  double var_y;
  double var_g;
  double corr;
};

class HGPPosterior {
 public:
  // Zero observations are allowed and give the prior.
  HGPPosterior(std::vector<Observation> observations, HGPParams params);

  BivariateBelief joint_predict(const Point& x, RealizationId s) const;
  Prediction predict_g(const Point& x) const;

  // Posterior covariance of the noisy observations y_{s_j}(x_j). Noise is
  // added on the diagonal only: repeated entries are independent draws.
  Eigen::MatrixXd batch_covariance(std::span<const EvaluationPoint> batch) const;
  Eigen::MatrixXd batch_correlation(std::span<const EvaluationPoint> batch) const;

  // L^{-1} k(z) for the prior cross-covariances between z and the data. The
  // posterior covariance of two points is prior - dot(whitened_a, whitened_b).
  Eigen::VectorXd whitened_cross_covariance(const Point& x, RealizationId s) const;

  const std::vector<Observation>& observations() const { return observations_; }
  const HGPParams& params() const { return params_; }
  std::size_t dim() const { return params_.dim(); }
  // Empty when there are no observations.
  const CholeskyFactor& factor() const { return factor_; }

 private:
  // Fills k_g(x, x_i) and the realization mask [s == s_i].
  void cross_terms(const Point& x, RealizationId s, Eigen::VectorXd& upper, Eigen::VectorXd& mask) const;

  std::vector<Observation> observations_;
  HGPParams params_;
  CholeskyFactor factor_;
  Eigen::VectorXd alpha_;
};

// Joint kernel matrix over the observations plus noise on the diagonal.
Eigen::MatrixXd hgp_kernel_matrix(const std::vector<Observation>& observations, const HGPParams& params);

HGPPosterior fit_hgp(const std::vector<Observation>& observations, const HGPParams& params);

double hgp_log_marginal_likelihood(const std::vector<Observation>& observations, const HGPParams& params);

struct HGPFit {
  HGPParams params;
  double log_likelihood;
};

// Maximizes the joint marginal likelihood over the d+3 free parameters
// (shared lengthscales, upper variance, lower variance, noise). Both
// variances use the variance bounds.
HGPFit fit_hgp_hyperparameters(const std::vector<Observation>& observations,
                               const HyperparameterBounds& bounds, int n_restarts, Rng& rng,
                               const std::optional<HGPParams>& warm_start = {});

}  // namespace bosh

#endif  // BOSH_HGP_MODEL_HPP
