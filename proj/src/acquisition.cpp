#include "bosh/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bosh/errors.hpp"
#include "bosh/numerics.hpp"

namespace bosh {

namespace {

constexpr double kCorrelationCutoff = 1.0 - 1e-9;
constexpr double kHermiteMaxCorrelation = 0.9;
constexpr int kHermiteNodes = 64;
constexpr int kPanelNodes = 32;

double clamp_gamma(double g) { return std::clamp(g, -kGammaClamp, kGammaClamp); }

double log_independence_cdf(double y, std::span<const double> means, std::span<const double> sds) {
  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (sds[i] > 0.0) {
      total += log_normal_cdf((y - means[i]) / sds[i]);
    } else if (y < means[i]) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return total;
}

// Smallest y with log F(y) >= log_level, by bisection on [lo, hi].
double independence_quantile(double log_level, double lo, double hi, std::span<const double> means,
                             std::span<const double> sds) {
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_independence_cdf(mid, means, sds) < log_level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <typename Predict>
MaxValueSamples sample_from_grid(Predict&& predict, const std::vector<Point>& observed, std::size_t dim,
                                 int samples, int grid_size, Rng& rng) {
  BOSH_EXPECT(samples >= 1 && grid_size >= 1, "g* sampling needs M >= 1 and grid_size >= 1");
  HaltonSequence grid(static_cast<int>(dim), rng);
  std::vector<double> means, sds;
  means.reserve(grid_size + observed.size());
  sds.reserve(grid_size + observed.size());
  auto add = [&](const Point& x) {
    const Prediction p = predict(x);
    means.push_back(p.mean);
    sds.push_back(std::sqrt(p.variance));
  };
  for (int i = 0; i < grid_size; ++i) add(grid.point(i));
  for (const Point& x : observed) add(x);
  MaxValueSamples out = gumbel_max_samples(means, sds, samples, rng);
  out.grid_size = grid_size;
  return out;
}

}  // namespace

double independence_max_cdf(double y, std::span<const double> means, std::span<const double> sds) {
  BOSH_EXPECT(means.size() == sds.size(), "means/sds size mismatch");
  return std::exp(log_independence_cdf(y, means, sds));
}

MaxValueSamples gumbel_max_samples(std::span<const double> means, std::span<const double> sds, int samples,
                                   Rng& rng) {
  BOSH_EXPECT(!means.empty() && means.size() == sds.size(), "need matching non-empty marginals");
  BOSH_EXPECT(samples >= 1, "need at least one sample");
  double max_mean = -std::numeric_limits<double>::infinity();
  double max_sd = 0.0;
  double max_upper = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < means.size(); ++i) {
    BOSH_EXPECT(std::isfinite(means[i]) && std::isfinite(sds[i]) && sds[i] >= 0.0, "invalid marginal");
    max_mean = std::max(max_mean, means[i]);
    max_sd = std::max(max_sd, sds[i]);
    max_upper = std::max(max_upper, means[i] + 10.0 * sds[i]);
  }
  if (max_sd <= 0.0) throw SamplingError("degenerate grid: every predictive sd is zero");

  const double lo = max_mean - 10.0 * max_sd;
  const double hi = max_upper;
  const double q25 = independence_quantile(std::log(0.25), lo, hi, means, sds);
  const double q75 = independence_quantile(std::log(0.75), lo, hi, means, sds);
  // Gumbel quantile: a - b log(-log q)
  const double l25 = std::log(-std::log(0.25));
  const double l75 = std::log(-std::log(0.75));
  const double scale = (q75 - q25) / (l25 - l75);
  const double location = q25 + scale * l25;

  MaxValueSamples out;
  out.grid_size = static_cast<int>(means.size());
  out.location = location;
  out.scale = scale;
  out.values.reserve(samples);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m = 0; m < samples; ++m) {
    double u = unif(rng);
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    out.values.push_back(location - scale * std::log(-std::log(u)));
  }
  return out;
}

MaxValueSamples sample_gstar(const HGPPosterior& posterior, int samples, int grid_size, Rng& rng) {
  std::vector<Point> observed;
  observed.reserve(posterior.observations().size());
  for (const Observation& o : posterior.observations()) observed.push_back(o.x);
  return sample_from_grid([&](const Point& x) { return posterior.predict_g(x); }, observed, posterior.dim(),
                          samples, grid_size, rng);
}

MaxValueSamples sample_gstar(const GPPosterior& posterior, int samples, int grid_size, Rng& rng) {
  return sample_from_grid([&](const Point& x) { return posterior.predict(x); }, posterior.inputs(),
                          posterior.dim(), samples, grid_size, rng);
}

double max_value_information_closed_form(std::span<const double> gammas) {
  BOSH_EXPECT(!gammas.empty(), "need at least one g* sample");
  double total = 0.0;
  for (double g : gammas) {
    const double gamma = clamp_gamma(g);
    const double log_cdf = log_normal_cdf(gamma);
    total += gamma * normal_pdf(gamma) / (2.0 * std::exp(log_cdf)) - log_cdf;
  }
  return total / static_cast<double>(gammas.size());
}

double max_value_information(double rho, std::span<const double> gammas, QuadratureMethod method,
                             int trapezoid_points) {
  BOSH_EXPECT(!gammas.empty(), "need at least one g* sample");
  BOSH_EXPECT(std::isfinite(rho), "correlation must be finite");
  const double r = std::min(std::abs(rho), 1.0);
  if (r >= kCorrelationCutoff) return max_value_information_closed_form(gammas);
  if (r == 0.0) return 0.0;
  const double s = std::sqrt((1.0 - r) * (1.0 + r));

  double total = 0.0;
  for (double g : gammas) {
    const double gamma = clamp_gamma(g);
    const double log_p_gamma = log_normal_cdf(gamma);
    // Tilt of the standard normal density once g <= g* is known: w = Phi((gamma - r t)/s) / Phi(gamma).
    auto log_tilt = [&](double t) { return log_normal_cdf((gamma - r * t) / s) - log_p_gamma; };

    if (method == QuadratureMethod::kTrapezoid) {
      // Literal -int p log p on a uniform grid.
      BOSH_EXPECT(trapezoid_points >= 3, "trapezoid rule needs at least 3 points");
      const double a = -10.0, b = 10.0;
      const double h = (b - a) / (trapezoid_points - 1);
      double entropy = 0.0;
      for (int i = 0; i < trapezoid_points; ++i) {
        const double t = a + h * i;
        const double log_p = -0.5 * t * t - 0.5 * std::log(2.0 * std::numbers::pi) + log_tilt(t);
        const double p = std::exp(log_p);
        const double term = p > 0.0 ? -p * log_p : 0.0;
        entropy += (i == 0 || i == trapezoid_points - 1) ? 0.5 * term : term;
      }
      entropy *= h;
      total += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) - entropy;
      continue;
    }

    // With E_phi[w] = 1 the information reduces to E_phi[w log w - w t^2 / 2] + 1/2.
    auto integrand = [&](double t) {
      const double lw = log_tilt(t);
      const double w = std::exp(lw);
      return w > 0.0 ? w * lw - 0.5 * w * t * t : 0.0;
    };
    double expectation = 0.0;
    if (r <= kHermiteMaxCorrelation) {
      const QuadratureRule& rule = gauss_hermite_standard(kHermiteNodes);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) expectation += rule.weights[i] * integrand(rule.nodes[i]);
    } else {
      // The tilt steps from 1/Phi(gamma) to 0 around t0 over a width s/r;
      // split there so each panel sees a smooth integrand.
      const double t0 = gamma / r;
      const double width = s / r;
      const double lo = -12.0, hi = 12.0;
      double cuts[5] = {lo, std::clamp(t0 - 8.0 * width, lo, hi), std::clamp(t0, lo, hi),
                        std::clamp(t0 + 8.0 * width, lo, hi), hi};
      const QuadratureRule& rule = gauss_legendre(kPanelNodes);
      for (int p = 0; p < 4; ++p) {
        const double a = cuts[p], b = cuts[p + 1];
        if (b <= a) continue;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          const double t = mid + half * rule.nodes[i];
          expectation += half * rule.weights[i] * normal_pdf(t) * integrand(t);
        }
      }
    }
    total += expectation + 0.5;
  }
  return total / static_cast<double>(gammas.size());
}

std::vector<double> standardized_gaps(const MaxValueSamples& gstar, double mean, double sd) {
  BOSH_EXPECT(!gstar.values.empty(), "no g* samples");
  std::vector<double> gammas;
  gammas.reserve(gstar.values.size());
  for (double v : gstar.values) {
    const double g = sd > 0.0 ? (v - mean) / sd : (v >= mean ? kGammaClamp : -kGammaClamp);
    gammas.push_back(clamp_gamma(g));
  }
  return gammas;
}

namespace {

void check_candidate(const EvaluationPoint& z, const AcquisitionContext& ctx) {
  BOSH_EXPECT(ctx.posterior != nullptr, "acquisition context has no posterior");
  BOSH_EXPECT(!ctx.gstar.values.empty(), "acquisition context has no g* samples");
  const bool listed = std::find(ctx.candidates.begin(), ctx.candidates.end(), z.s) != ctx.candidates.end();
  BOSH_EXPECT(listed || z.s.is_fresh(), "realization " + z.s.to_string() + " is not a candidate");
}

}  // namespace

double mumbo(const EvaluationPoint& z, const AcquisitionContext& ctx) {
  check_candidate(z, ctx);
  const BivariateBelief b = ctx.posterior->joint_predict(z.x, z.s);
  if (b.var_g <= 0.0 || b.var_y <= 0.0) return 0.0;
  const std::vector<double> gammas = standardized_gaps(ctx.gstar, b.mean_g, std::sqrt(b.var_g));
  return max_value_information(b.corr, gammas);
}

double bosh_batch_score(std::span<const EvaluationPoint> batch, const AcquisitionContext& ctx) {
  BOSH_EXPECT(!batch.empty(), "batch must be non-empty");
  double score = 0.0;
  for (const EvaluationPoint& z : batch) score += mumbo(z, ctx);
  if (batch.size() == 1) return score;
  const Eigen::MatrixXd corr = ctx.posterior->batch_correlation(batch);
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) throw NumericalError("batch correlation matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  return score + l.diagonal().array().log().sum();
}

ConditionalLogDet::ConditionalLogDet(const Eigen::MatrixXd& fixed_correlation) {
  if (fixed_correlation.size() == 0) return;
  Eigen::LLT<Eigen::MatrixXd> llt(fixed_correlation);
  if (llt.info() != Eigen::Success) throw NumericalError("fixed batch correlation is not positive definite");
  lower_ = llt.matrixL();
  fixed_log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

double ConditionalLogDet::log_schur(const Eigen::VectorXd& cross_correlation) const {
  if (lower_.size() == 0) return 0.0;
  const Eigen::VectorXd v = lower_.triangularView<Eigen::Lower>().solve(cross_correlation);
  return std::log(std::max(1.0 - v.squaredNorm(), 1e-300));
}

BoshBatchScorer::BoshBatchScorer(const AcquisitionContext& ctx, std::vector<EvaluationPoint> fixed)
    : ctx_(ctx), fixed_(std::move(fixed)) {
  const HGPPosterior& post = *ctx_.posterior;
  const Eigen::Index b = static_cast<Eigen::Index>(fixed_.size());
  whitened_.resize(static_cast<Eigen::Index>(post.observations().size()), b);
  for (Eigen::Index j = 0; j < b; ++j) whitened_.col(j) = post.whitened_cross_covariance(fixed_[j].x, fixed_[j].s);
  if (b > 0) {
    const Eigen::MatrixXd cov = post.batch_covariance(fixed_);
    fixed_sd_ = cov.diagonal().cwiseSqrt();
    Eigen::MatrixXd corr = fixed_sd_.cwiseInverse().asDiagonal() * cov * fixed_sd_.cwiseInverse().asDiagonal();
    corr.diagonal().setOnes();
    logdet_ = ConditionalLogDet(corr);
  }
  fixed_score_ = 0.5 * logdet_.fixed_log_det();
  for (const EvaluationPoint& z : fixed_) fixed_score_ += mumbo(z, ctx_);
}

double BoshBatchScorer::gain(const EvaluationPoint& z) const {
  const double info = mumbo(z, ctx_);
  if (fixed_.empty()) return info;
  const HGPPosterior& post = *ctx_.posterior;
  const Eigen::VectorXd w = post.whitened_cross_covariance(z.x, z.s);
  const HGPParams& p = post.params();
  const double var_z = std::max(p.upper_variance + p.lower_variance - w.squaredNorm(), 0.0) + p.noise;
  const double sd_z = std::sqrt(var_z);
  Eigen::VectorXd c(static_cast<Eigen::Index>(fixed_.size()));
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    double cov = hgp_cov(z.x, z.s, fixed_[j].x, fixed_[j].s, p);
    if (w.size() > 0) cov -= w.dot(whitened_.col(j));
    c(j) = cov / (sd_z * fixed_sd_(j));
  }
  return 0.5 * logdet_.log_schur(c) + info;
}

double expected_improvement(double mean, double sd, double incumbent) {
  if (!(sd > 0.0)) return std::max(mean - incumbent, 0.0);
  const double u = (mean - incumbent) / sd;
  return std::max(sd * (u * normal_cdf(u) + normal_pdf(u)), 0.0);
}

double expected_improvement(const Point& x, const GPPosterior& posterior, double incumbent) {
  const Prediction p = posterior.predict(x);
  return expected_improvement(p.mean, std::sqrt(p.variance), incumbent);
}

double mes(double mean, double sd, const MaxValueSamples& gstar) {
  if (!(sd > 0.0)) return 0.0;
  return max_value_information_closed_form(standardized_gaps(gstar, mean, sd));
}

double mes(const Point& x, const GPPosterior& posterior, const MaxValueSamples& gstar) {
  const Prediction p = posterior.predict(x);
  return mes(p.mean, std::sqrt(p.variance), gstar);
}

namespace {

Eigen::MatrixXd to_correlation(const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  BOSH_EXPECT((sd.array() > 0.0).all(), "zero predictive variance in batch");
  Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  corr.diagonal().setOnes();
  return corr;
}

}  // namespace

double mes_batch_score(const std::vector<Point>& batch, const GPPosterior& posterior, const MaxValueSamples& gstar) {
  BOSH_EXPECT(!batch.empty(), "batch must be non-empty");
  double score = 0.0;
  for (const Point& x : batch) score += mes(x, posterior, gstar);
  if (batch.size() == 1) return score;
  Eigen::LLT<Eigen::MatrixXd> llt(to_correlation(posterior.predictive_covariance(batch, true)));
  if (llt.info() != Eigen::Success) throw NumericalError("batch correlation matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  return score + l.diagonal().array().log().sum();
}

MesBatchScorer::MesBatchScorer(const GPPosterior& posterior, const MaxValueSamples& gstar, std::vector<Point> fixed)
    : posterior_(posterior), gstar_(gstar), fixed_(std::move(fixed)) {
  if (fixed_.empty()) return;
  const Eigen::MatrixXd corr = to_correlation(posterior_.predictive_covariance(fixed_, true));
  logdet_ = ConditionalLogDet(corr);
  fixed_score_ = 0.5 * logdet_.fixed_log_det();
  for (const Point& x : fixed_) fixed_score_ += mes(x, posterior_, gstar_);
}

double MesBatchScorer::gain(const Point& x) const {
  const double info = mes(x, posterior_, gstar_);
  if (fixed_.empty()) return info;
  std::vector<Point> extended = fixed_;
  extended.push_back(x);
  const Eigen::MatrixXd corr = to_correlation(posterior_.predictive_covariance(extended, true));
  const Eigen::Index b = static_cast<Eigen::Index>(fixed_.size());
  return info + 0.5 * logdet_.log_schur(corr.col(b).head(b));
}

}  // namespace bosh
