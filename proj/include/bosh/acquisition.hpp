#ifndef BOSH_ACQUISITION_HPP
#define BOSH_ACQUISITION_HPP

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bosh/gp_core.hpp"
#include "bosh/hgp_model.hpp"
#include "bosh/random.hpp"

namespace bosh {

// Samples of the maximum value g* given the data, drawn from a Gumbel fit.
struct MaxValueSamples {
  std::vector<double> values;
  int grid_size = 0;
  double location = 0.0;
  double scale = 0.0;
};

// Standardized gaps are clamped to this range before use.
inline constexpr double kGammaClamp = 8.0;

// prod_i Phi((y - mu_i) / sd_i), the independence approximation of P(max <= y).
double independence_max_cdf(double y, std::span<const double> means, std::span<const double> sds);

// Fits a Gumbel distribution to the independence approximation by matching
// its quartiles and draws M samples by inverse CDF. Throws SamplingError when
// every sd is zero.
MaxValueSamples gumbel_max_samples(std::span<const double> means, std::span<const double> sds, int samples,
                                   Rng& rng);

// Evaluates predict_g on grid_size quasi-random points plus every observed x
// and feeds the marginals to gumbel_max_samples.
MaxValueSamples sample_gstar(const HGPPosterior& posterior, int samples, int grid_size, Rng& rng);
MaxValueSamples sample_gstar(const GPPosterior& posterior, int samples, int grid_size, Rng& rng);

enum class QuadratureMethod {
  kAdaptive,   // Gauss-Hermite 64; panelled Gauss-Legendre near |rho| = 1
  kTrapezoid,  // 2000-point trapezoid on [-10, 10], for validation
};

// Mean over gammas of the information an observation with correlation rho to
// g carries about g* (the MUMBO integral in standardized coordinates).
// |rho| >= 1 - 1e-9 uses the truncated-normal closed form.
double max_value_information(double rho, std::span<const double> gammas,
                             QuadratureMethod method = QuadratureMethod::kAdaptive,
                             int trapezoid_points = 2000);

// (1/M) sum_m [gamma_m phi(gamma_m) / (2 Phi(gamma_m)) - log Phi(gamma_m)]
double max_value_information_closed_form(std::span<const double> gammas);

// (g*_m - mean) / sd, clamped to [-8, 8].
std::vector<double> standardized_gaps(const MaxValueSamples& gstar, double mean, double sd);

struct AcquisitionContext {
  std::shared_ptr<const HGPPosterior> posterior;
  MaxValueSamples gstar;
  // The candidate set: pool members and one fresh id.
  std::vector<RealizationId> candidates;
};

double mumbo(const EvaluationPoint& z, const AcquisitionContext& ctx);

// 1/2 log det C + sum_j mumbo(z_j), C the predictive correlation of the batch.
double bosh_batch_score(std::span<const EvaluationPoint> batch, const AcquisitionContext& ctx);

// log det of a correlation matrix extended by one row, through the Schur
// complement against a fixed block.
class ConditionalLogDet {
 public:
  ConditionalLogDet() = default;
  explicit ConditionalLogDet(const Eigen::MatrixXd& fixed_correlation);

  double fixed_log_det() const { return fixed_log_det_; }
  // log(1 - c^T C^{-1} c); -inf when the extension is singular.
  double log_schur(const Eigen::VectorXd& cross_correlation) const;

 private:
  Eigen::MatrixXd lower_;
  double fixed_log_det_ = 0.0;
};

// Scores batch extensions z for a fixed partial batch: the score of
// fixed + {z} is fixed_score() + gain(z).
class BoshBatchScorer {
 public:
  BoshBatchScorer(const AcquisitionContext& ctx, std::vector<EvaluationPoint> fixed);

  double fixed_score() const { return fixed_score_; }
  double gain(const EvaluationPoint& z) const;

 private:
  const AcquisitionContext& ctx_;
  std::vector<EvaluationPoint> fixed_;
  Eigen::MatrixXd whitened_;  // n x b
  Eigen::VectorXd fixed_sd_;
  ConditionalLogDet logdet_;
  double fixed_score_ = 0.0;
};

// Standard EI for maximization; sd == 0 gives max(mean - incumbent, 0).
double expected_improvement(double mean, double sd, double incumbent);
double expected_improvement(const Point& x, const GPPosterior& posterior, double incumbent);

// MES on the latent of a single-output GP: the rho = 1 case of MUMBO.
double mes(double mean, double sd, const MaxValueSamples& gstar);
double mes(const Point& x, const GPPosterior& posterior, const MaxValueSamples& gstar);

// The batch score with mes in place of mumbo on a single-output GP:
// 1/2 log det C + sum_j mes(x_j), C the correlation of the noisy observations.
double mes_batch_score(const std::vector<Point>& batch, const GPPosterior& posterior, const MaxValueSamples& gstar);

class MesBatchScorer {
 public:
  MesBatchScorer(const GPPosterior& posterior, const MaxValueSamples& gstar, std::vector<Point> fixed);

  double fixed_score() const { return fixed_score_; }
  double gain(const Point& x) const;

 private:
  const GPPosterior& posterior_;
  const MaxValueSamples& gstar_;
  std::vector<Point> fixed_;
  ConditionalLogDet logdet_;
  double fixed_score_ = 0.0;
};

}  // namespace bosh

#endif  // BOSH_ACQUISITION_HPP
