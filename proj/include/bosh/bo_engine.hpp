#ifndef BOSH_BO_ENGINE_HPP
#define BOSH_BO_ENGINE_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bosh/acquisition.hpp"
#include "bosh/benchmarks.hpp"
#include "bosh/direct_opt.hpp"
#include "bosh/gp_core.hpp"
#include "bosh/hgp_model.hpp"
#include "bosh/random.hpp"

namespace bosh {

enum class Method { kBosh, kFixedEi, kFixedMes, kResampled, kBatchMesSingle };

inline constexpr std::array<std::string_view, 5> kMethodNames = {"BOSH", "FIXED_EI", "FIXED_MES", "RESAMPLED",
                                                                  "BATCH_MES_SINGLE"};

std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);

enum class DesignKind { kQuasiRandom, kUniform };

struct ModelConfig {
  int n_restarts = 3;
  HyperparameterBounds bounds;
};

struct AcquisitionConfig {
  int gstar_samples = 10;
  int grid_per_dim = 1000;
  int direct_evals_per_dim = 100;
  int incumbent_evals_per_dim = 200;
};

struct RunConfig {
  Method method = Method::kBosh;
  // B for batch methods, K for evaluation strategies.
  int batch = 1;
  int budget_steps = 10;
  int dim = 1;
  std::uint64_t seed = 0;
  ModelConfig model;
  AcquisitionConfig acquisition;
  DesignKind design = DesignKind::kQuasiRandom;
  // Largest pool BOSH may grow to; unset means unbounded.
  std::optional<int> pool_cap;

  void validate() const;
};

// Seed for the benchmark instance of a run, from the run's benchmark stream.
std::uint64_t benchmark_seed(std::uint64_t run_seed);

// Label written to trace rows for an evaluation.
struct ProposedPoint {
  Point x;
  std::string realization;
};

struct StepRecord {
  int step = 0;
  long long cumulative_evals = 0;
  int batch_size = 0;
  int pool_size = 0;
  std::vector<ProposedPoint> proposed;
  std::vector<double> observed_y;
  Point incumbent;
  double true_value = 0.0;
  double suboptimality = 0.0;
};

struct RunTrace {
  long long initial_evals = 0;
  std::vector<StepRecord> steps;
};

// The run was stopped after a model fit failed twice in one step.
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<Point> initial_design(int count, int dim, DesignKind design, Rng& rng);

struct BoshInit {
  EvaluationPool pool;
  std::vector<Observation> observations;
};

// d+5 evaluations spread round-robin over two freshly minted realizations.
BoshInit initialize_bosh(Benchmark& benchmark, int dim, Rng& design_rng, DesignKind design = DesignKind::kQuasiRandom);

// K realizations averaged into one strategy evaluation g~_S(x).
struct FixedStrategy {
  std::vector<std::uint64_t> realizations;

  double evaluate(Benchmark& benchmark, const Point& x) const;
};

struct StrategyObservation {
  Point x;
  double y;
};

struct FixedInit {
  FixedStrategy strategy;
  std::vector<StrategyObservation> observations;
  long long individual_evals = 0;
  int minted = 0;
};

// d+3 strategy evaluations (K(d+3) individual ones). With resample, every
// strategy evaluation uses K freshly minted realizations.
FixedInit initialize_fixed(Benchmark& benchmark, int dim, int k, Rng& design_rng,
                           DesignKind design = DesignKind::kQuasiRandom, bool resample = false);

// Targets shifted and scaled to zero mean, unit variance (unit scale when
// the sample variance is zero).
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(const std::vector<double>& values);
  double apply(double y) const { return (y - mean) / scale; }
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void initialize() = 0;
  virtual StepRecord step() = 0;
  virtual Point recommend_incumbent() const = 0;
  virtual long long cumulative_evals() const = 0;
};

class BoshOptimizer final : public Optimizer {
 public:
  BoshOptimizer(const RunConfig& config, Benchmark& benchmark);

  void initialize() override;
  // Refit, refresh g*, propose a batch, mint fresh realizations, evaluate.
  StepRecord step() override;
  // argmax of the posterior mean of g, found with DIRECT.
  Point recommend_incumbent() const override;
  long long cumulative_evals() const override { return cumulative_evals_; }

  const EvaluationPool& pool() const { return pool_; }
  const std::vector<Observation>& observations() const { return observations_; }
  const std::optional<HGPParams>& params() const { return params_; }
  const BatchProposal& last_proposal() const { return last_proposal_; }
  // The model the incumbent is read from (standardized targets).
  const std::shared_ptr<const HGPPosterior>& posterior() const { return posterior_; }

 private:
  std::vector<Observation> standardized() const;
  std::shared_ptr<const HGPPosterior> refit(bool warm);

  RunConfig config_;
  Benchmark& benchmark_;
  Rng model_rng_;
  Rng design_rng_;
  Rng gstar_rng_;
  EvaluationPool pool_;
  std::vector<Observation> observations_;
  std::optional<HGPParams> params_;
  std::shared_ptr<const HGPPosterior> posterior_;
  BatchProposal last_proposal_;
  long long cumulative_evals_ = 0;
  int steps_ = 0;
};

// FIXED_EI, FIXED_MES, RESAMPLED and BATCH_MES_SINGLE.
class BaselineOptimizer final : public Optimizer {
 public:
  BaselineOptimizer(const RunConfig& config, Benchmark& benchmark);

  void initialize() override;
  StepRecord step() override;
  // argmax of the strategy GP posterior mean, found with DIRECT.
  Point recommend_incumbent() const override;
  long long cumulative_evals() const override { return cumulative_evals_; }

  const std::vector<StrategyObservation>& observations() const { return observations_; }
  const FixedStrategy& strategy() const { return strategy_; }
  int minted() const { return minted_; }
  const std::shared_ptr<const GPPosterior>& posterior() const { return posterior_; }

 private:
  // Without optimize, reuses the current hyperparameters.
  std::shared_ptr<const GPPosterior> refit(bool warm, bool optimize = true);
  std::vector<Point> propose(const GPPosterior& posterior);

  RunConfig config_;
  Benchmark& benchmark_;
  Rng model_rng_;
  Rng design_rng_;
  Rng gstar_rng_;
  FixedStrategy strategy_;
  std::vector<StrategyObservation> observations_;
  std::optional<GPHyperparameters> params_;
  std::shared_ptr<const GPPosterior> posterior_;
  long long cumulative_evals_ = 0;
  int minted_ = 0;
  int steps_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const RunConfig& config, Benchmark& benchmark);

// Initializes and runs budget_steps steps, one StepRecord per step.
RunTrace run_optimization(const RunConfig& config, Benchmark& benchmark);

}  // namespace bosh

#endif  // BOSH_BO_ENGINE_HPP
