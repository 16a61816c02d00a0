#include "bosh/hgp_model.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "bosh/errors.hpp"
#include "bosh/numerics.hpp"

namespace bosh {

std::string RealizationId::to_string() const {
  switch (kind_) {
    case Kind::kMember:
      return std::to_string(index_);
    case Kind::kFresh:
      return index_ == 0 ? "new" : "new" + std::to_string(index_);
    case Kind::kLatent:
      return "g";
  }
  return "?";
}

RealizationId EvaluationPool::add(std::uint64_t benchmark_handle) {
  handles_.push_back(benchmark_handle);
  return RealizationId::member(static_cast<std::uint32_t>(handles_.size() - 1));
}

std::uint64_t EvaluationPool::handle(RealizationId s) const {
  BOSH_EXPECT(contains(s), "realization " + s.to_string() + " is not a pool member");
  return handles_[s.index()];
}

std::vector<RealizationId> EvaluationPool::members() const {
  std::vector<RealizationId> out;
  out.reserve(handles_.size());
  for (std::size_t i = 0; i < handles_.size(); ++i)
    out.push_back(RealizationId::member(static_cast<std::uint32_t>(i)));
  return out;
}

void HGPParams::validate() const {
  BOSH_EXPECT(!lengthscales.empty(), "HGP needs at least one lengthscale");
  for (double l : lengthscales) BOSH_EXPECT(l > 0.0 && std::isfinite(l), "lengthscales must be positive");
  BOSH_EXPECT(upper_variance > 0.0 && std::isfinite(upper_variance), "upper variance must be positive");
  BOSH_EXPECT(lower_variance >= 0.0 && std::isfinite(lower_variance), "lower variance must be non-negative");
  BOSH_EXPECT(noise > 0.0 && std::isfinite(noise), "noise must be positive");
}

namespace {

bool shares_realization(RealizationId a, RealizationId b) { return a == b && !a.is_latent(); }

}  // namespace

double hgp_cov(const Point& x, RealizationId s, const Point& x2, RealizationId s2,
               const HGPParams& params) {
  const double r = scaled_distance(x, x2, params.lengthscales);
  double cov = matern52_from_distance(r, params.upper_variance);
  if (shares_realization(s, s2)) cov += matern52_from_distance(r, params.lower_variance);
  return cov;
}

Eigen::MatrixXd hgp_kernel_matrix(const std::vector<Observation>& observations, const HGPParams& params) {
  const Eigen::Index n = static_cast<Eigen::Index>(observations.size());
  const double lower_ratio = params.lower_variance / params.upper_variance;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = params.upper_variance + params.lower_variance + params.noise;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double kg = matern52_from_distance(
          scaled_distance(observations[i].x, observations[j].x, params.lengthscales), params.upper_variance);
      const double v = shares_realization(observations[i].s, observations[j].s) ? kg * (1.0 + lower_ratio) : kg;
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

HGPPosterior::HGPPosterior(std::vector<Observation> observations, HGPParams params)
    : observations_(std::move(observations)), params_(std::move(params)) {
  params_.validate();
  for (const Observation& o : observations_) {
    BOSH_EXPECT(static_cast<std::size_t>(o.x.size()) == params_.dim(), "observation dimension mismatch");
    BOSH_EXPECT(o.s.is_member(), "observations must be on pool members");
  }
  if (observations_.empty()) return;
  factor_ = CholeskyFactor(hgp_kernel_matrix(observations_, params_));
  Eigen::VectorXd y(observations_.size());
  for (std::size_t i = 0; i < observations_.size(); ++i) y(i) = observations_[i].y;
  alpha_ = factor_.solve(y);
}

void HGPPosterior::cross_terms(const Point& x, RealizationId s, Eigen::VectorXd& upper,
                               Eigen::VectorXd& mask) const {
  BOSH_EXPECT(static_cast<std::size_t>(x.size()) == dim(), "query dimension mismatch");
  const Eigen::Index n = static_cast<Eigen::Index>(observations_.size());
  upper.resize(n);
  mask.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    upper(i) = matern52_from_distance(scaled_distance(x, observations_[i].x, params_.lengthscales),
                                      params_.upper_variance);
    mask(i) = shares_realization(s, observations_[i].s) ? 1.0 : 0.0;
  }
}

Eigen::VectorXd HGPPosterior::whitened_cross_covariance(const Point& x, RealizationId s) const {
  Eigen::VectorXd upper, mask;
  cross_terms(x, s, upper, mask);
  if (observations_.empty()) return upper;
  const double lower_ratio = params_.lower_variance / params_.upper_variance;
  return factor_.solve_lower(upper + lower_ratio * mask.cwiseProduct(upper));
}

BivariateBelief HGPPosterior::joint_predict(const Point& x, RealizationId s) const {
  BOSH_EXPECT(!s.is_latent(), "joint_predict needs a realization, not the latent tag");
  const double prior_g = params_.upper_variance;
  const double prior_y = params_.upper_variance + params_.lower_variance + params_.noise;
  BivariateBelief b{0.0, 0.0, prior_y, prior_g, 0.0};
  if (!observations_.empty()) {
    Eigen::VectorXd upper, mask;
    cross_terms(x, s, upper, mask);
    const double lower_ratio = params_.lower_variance / params_.upper_variance;
    const Eigen::VectorXd k_y = upper + lower_ratio * mask.cwiseProduct(upper);
    const Eigen::VectorXd w_y = factor_.solve_lower(k_y);
    const Eigen::VectorXd w_g = factor_.solve_lower(upper);
    b.mean_y = k_y.dot(alpha_);
    b.mean_g = upper.dot(alpha_);
    b.var_y = std::max(prior_y - w_y.squaredNorm(), 0.0);
    b.var_g = std::max(prior_g - w_g.squaredNorm(), 0.0);
    const double cov = prior_g - w_y.dot(w_g);
    const double denom = std::sqrt(b.var_y * b.var_g);
    b.corr = denom > 0.0 ? std::clamp(cov / denom, -1.0, 1.0) : 0.0;
  } else {
    b.corr = std::sqrt(prior_g / prior_y);
  }
  return b;
}

Prediction HGPPosterior::predict_g(const Point& x) const {
  if (observations_.empty()) {
    BOSH_EXPECT(static_cast<std::size_t>(x.size()) == dim(), "query dimension mismatch");
    return {0.0, params_.upper_variance};
  }
  Eigen::VectorXd upper, mask;
  cross_terms(x, RealizationId::latent(), upper, mask);
  const Eigen::VectorXd w = factor_.solve_lower(upper);
  return {upper.dot(alpha_), std::max(params_.upper_variance - w.squaredNorm(), 0.0)};
}

Eigen::MatrixXd HGPPosterior::batch_covariance(std::span<const EvaluationPoint> batch) const {
  BOSH_EXPECT(!batch.empty(), "batch must be non-empty");
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd whitened(static_cast<Eigen::Index>(observations_.size()), b);
  for (Eigen::Index j = 0; j < b; ++j) {
    BOSH_EXPECT(!batch[j].s.is_latent(), "batch elements must be realizations");
    whitened.col(j) = whitened_cross_covariance(batch[j].x, batch[j].s);
  }
  Eigen::MatrixXd cov(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      cov(i, j) = cov(j, i) = hgp_cov(batch[i].x, batch[i].s, batch[j].x, batch[j].s, params_);
  if (!observations_.empty()) cov -= whitened.transpose() * whitened;
  cov.diagonal().array() += params_.noise;
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd HGPPosterior::batch_correlation(std::span<const EvaluationPoint> batch) const {
  Eigen::MatrixXd cov = batch_covariance(batch);
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  if ((sd.array() <= 0.0).any()) throw ContractViolation("zero predictive variance in batch");
  Eigen::MatrixXd corr(cov.rows(), cov.cols());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    corr(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) corr(i, j) = corr(j, i) = cov(i, j) / (sd(i) * sd(j));
  }
  return corr;
}

HGPPosterior fit_hgp(const std::vector<Observation>& observations, const HGPParams& params) {
  BOSH_EXPECT(!observations.empty(), "fit_hgp needs at least one observation");
  return HGPPosterior(observations, params);
}

double hgp_log_marginal_likelihood(const std::vector<Observation>& observations, const HGPParams& params) {
  BOSH_EXPECT(!observations.empty(), "likelihood needs at least one observation");
  params.validate();
  Eigen::VectorXd y(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) y(i) = observations[i].y;
  return gaussian_log_likelihood(CholeskyFactor(hgp_kernel_matrix(observations, params)), y);
}

HGPFit fit_hgp_hyperparameters(const std::vector<Observation>& observations,
                               const HyperparameterBounds& bounds, int n_restarts, Rng& rng,
                               const std::optional<HGPParams>& warm_start) {
  bounds.validate();
  BOSH_EXPECT(!observations.empty(), "hyperparameter fit needs data");
  const Eigen::Index d = observations.front().x.size();
  std::set<std::uint32_t> realizations;
  for (const Observation& o : observations) realizations.insert(o.s.index());
  if (realizations.size() < 2)
    throw IdentifiabilityError("upper and lower variances need observations on at least two realizations");
  BOSH_EXPECT(static_cast<Eigen::Index>(observations.size()) >= d + 5,
              "HGP hyperparameter fit needs at least d+5 observations");

  // Layout: [log l_1..l_d, log upper, log lower, log noise]
  Eigen::VectorXd lower(d + 3), upper(d + 3);
  lower.head(d).setConstant(std::log(bounds.lengthscale_lo));
  upper.head(d).setConstant(std::log(bounds.lengthscale_hi));
  lower(d) = lower(d + 1) = std::log(bounds.variance_lo);
  upper(d) = upper(d + 1) = std::log(bounds.variance_hi);
  lower(d + 2) = std::log(bounds.noise_lo);
  upper(d + 2) = std::log(bounds.noise_hi);

  auto unpack = [d](const Eigen::VectorXd& theta) {
    HGPParams p;
    p.lengthscales.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) p.lengthscales[i] = std::exp(theta(i));
    p.upper_variance = std::exp(theta(d));
    p.lower_variance = std::exp(theta(d + 1));
    p.noise = std::exp(theta(d + 2));
    return p;
  };
  auto negative_ll = [&](const Eigen::VectorXd& theta) {
    try {
      return -hgp_log_marginal_likelihood(observations, unpack(theta));
    } catch (const FitError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::optional<Eigen::VectorXd> first;
  if (warm_start) {
    BOSH_EXPECT(static_cast<Eigen::Index>(warm_start->dim()) == d, "warm start dimension mismatch");
    Eigen::VectorXd theta(d + 3);
    for (Eigen::Index i = 0; i < d; ++i) theta(i) = std::log(warm_start->lengthscales[i]);
    theta(d) = std::log(warm_start->upper_variance);
    theta(d + 1) = std::log(warm_start->lower_variance);
    theta(d + 2) = std::log(warm_start->noise);
    first = theta.cwiseMax(lower).cwiseMin(upper);
  }

  const NelderMeadResult best = multistart_minimize(negative_ll, lower, upper, n_restarts, rng, first);
  if (!std::isfinite(best.value)) throw FitError("no HGP hyperparameter candidate could be evaluated");
  return {unpack(best.x), -best.value};
}

}  // namespace bosh
