#include "bosh/bo_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "bosh/errors.hpp"
#include "bosh/numerics.hpp"

namespace bosh {

std::string_view method_name(Method method) { return kMethodNames[static_cast<std::size_t>(method)]; }

std::optional<Method> parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == name) return static_cast<Method>(i);
  return std::nullopt;
}

void RunConfig::validate() const {
  BOSH_EXPECT(batch >= 1, "B_or_K must be >= 1");
  BOSH_EXPECT(budget_steps >= 1, "budget_steps must be >= 1");
  BOSH_EXPECT(dim >= 1, "dim must be >= 1");
  BOSH_EXPECT(model.n_restarts >= 1, "n_restarts must be >= 1");
  model.bounds.validate();
  BOSH_EXPECT(acquisition.gstar_samples >= 1, "gstar_samples must be >= 1");
  BOSH_EXPECT(acquisition.grid_per_dim >= 1, "grid_per_dim must be >= 1");
  BOSH_EXPECT(acquisition.direct_evals_per_dim >= 1, "direct_evals_per_dim must be >= 1");
  BOSH_EXPECT(acquisition.incumbent_evals_per_dim >= 1, "incumbent_evals_per_dim must be >= 1");
  BOSH_EXPECT(!pool_cap || *pool_cap >= 2, "pool_cap must be >= 2");
}

std::uint64_t benchmark_seed(std::uint64_t run_seed) { return derive_stream(run_seed, StreamLabel::kBenchmark)(); }

std::vector<Point> initial_design(int count, int dim, DesignKind design, Rng& rng) {
  BOSH_EXPECT(count >= 0 && dim >= 1, "invalid design size");
  if (design == DesignKind::kQuasiRandom) return HaltonSequence(dim, rng).points(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    Point x(dim);
    for (int j = 0; j < dim; ++j) x(j) = unit(rng);
    points.push_back(std::move(x));
  }
  return points;
}

BoshInit initialize_bosh(Benchmark& benchmark, int dim, Rng& design_rng, DesignKind design) {
  BoshInit init;
  const RealizationId first = init.pool.add(benchmark.mint());
  const RealizationId second = init.pool.add(benchmark.mint());
  const std::vector<Point> xs = initial_design(dim + 5, dim, design, design_rng);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const RealizationId s = i % 2 == 0 ? first : second;
    init.observations.push_back({xs[i], s, benchmark.evaluate(xs[i], init.pool.handle(s))});
  }
  return init;
}

double FixedStrategy::evaluate(Benchmark& benchmark, const Point& x) const {
  BOSH_EXPECT(!realizations.empty(), "strategy has no realizations");
  double sum = 0.0;
  for (std::uint64_t handle : realizations) sum += benchmark.evaluate(x, handle);
  return sum / static_cast<double>(realizations.size());
}

namespace {

FixedStrategy mint_strategy(Benchmark& benchmark, int k) {
  FixedStrategy strategy;
  for (int i = 0; i < k; ++i) strategy.realizations.push_back(benchmark.mint());
  return strategy;
}

}  // namespace

FixedInit initialize_fixed(Benchmark& benchmark, int dim, int k, Rng& design_rng, DesignKind design,
                           bool resample) {
  BOSH_EXPECT(k >= 1, "K must be >= 1");
  FixedInit init;
  if (!resample) {
    init.strategy = mint_strategy(benchmark, k);
    init.minted = k;
  }
  for (const Point& x : initial_design(dim + 3, dim, design, design_rng)) {
    if (resample) {
      init.strategy = mint_strategy(benchmark, k);
      init.minted += k;
    }
    init.observations.push_back({x, init.strategy.evaluate(benchmark, x)});
    init.individual_evals += k;
  }
  return init;
}

Standardizer Standardizer::fit(const std::vector<double>& values) {
  BOSH_EXPECT(!values.empty(), "cannot standardize an empty set");
  Standardizer st;
  st.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - st.mean) * (v - st.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  st.scale = sd > 0.0 ? sd : 1.0;
  return st;
}

namespace {

double suboptimality(const Benchmark& benchmark, double true_value) {
  const std::optional<Optimum> opt = benchmark.true_optimum();
  return opt ? opt->value - true_value : std::numeric_limits<double>::quiet_NaN();
}

void fill_outcome(StepRecord& record, const Benchmark& benchmark, Point incumbent) {
  record.true_value = benchmark.true_value(incumbent);
  record.suboptimality = suboptimality(benchmark, record.true_value);
  record.incumbent = std::move(incumbent);
}

[[noreturn]] void abort_run(int step, const std::exception& first, const std::exception& second) {
  std::ostringstream msg;
  msg << "model fit failed twice at step " << step << ": " << first.what() << "; retry: " << second.what();
  throw RunAborted(msg.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// BOSH

BoshOptimizer::BoshOptimizer(const RunConfig& config, Benchmark& benchmark)
    : config_(config),
      benchmark_(benchmark),
      model_rng_(derive_stream(config.seed, StreamLabel::kModelFit)),
      design_rng_(derive_stream(config.seed, StreamLabel::kDesign)),
      gstar_rng_(derive_stream(config.seed, StreamLabel::kMaxValue)) {
  config_.validate();
  BOSH_EXPECT(config_.method == Method::kBosh, "BoshOptimizer runs the BOSH method only");
  BOSH_EXPECT(config_.dim == benchmark.dim(), "config dim does not match the benchmark");
}

void BoshOptimizer::initialize() {
  BoshInit init = initialize_bosh(benchmark_, config_.dim, design_rng_, config_.design);
  pool_ = std::move(init.pool);
  observations_ = std::move(init.observations);
  cumulative_evals_ = static_cast<long long>(observations_.size());
  posterior_ = refit(false);
}

std::vector<Observation> BoshOptimizer::standardized() const {
  std::vector<double> ys;
  ys.reserve(observations_.size());
  for (const Observation& o : observations_) ys.push_back(o.y);
  const Standardizer st = Standardizer::fit(ys);
  std::vector<Observation> out = observations_;
  for (Observation& o : out) o.y = st.apply(o.y);
  return out;
}

std::shared_ptr<const HGPPosterior> BoshOptimizer::refit(bool warm) {
  const std::vector<Observation> data = standardized();
  const HGPFit fit = fit_hgp_hyperparameters(data, config_.model.bounds, config_.model.n_restarts, model_rng_,
                                             warm ? params_ : std::nullopt);
  params_ = fit.params;
  return std::make_shared<const HGPPosterior>(data, fit.params);
}

StepRecord BoshOptimizer::step() {
  BOSH_EXPECT(posterior_ != nullptr, "initialize() must run before step()");
  ++steps_;
  const int dim = config_.dim;

  AcquisitionContext ctx;
  try {
    ctx.posterior = refit(true);
    ctx.gstar = sample_gstar(*ctx.posterior, config_.acquisition.gstar_samples,
                             config_.acquisition.grid_per_dim * dim, gstar_rng_);
  } catch (const FitError& first) {
    try {
      ctx.posterior = refit(false);
      ctx.gstar = sample_gstar(*ctx.posterior, config_.acquisition.gstar_samples,
                               config_.acquisition.grid_per_dim * dim, gstar_rng_);
    } catch (const std::exception& second) {
      abort_run(steps_, first, second);
    }
  }

  ctx.candidates = pool_.members();
  int max_fresh = -1;
  if (config_.pool_cap) max_fresh = std::max(0, *config_.pool_cap - static_cast<int>(pool_.size()));
  if (max_fresh != 0) ctx.candidates.push_back(RealizationId::fresh());
  last_proposal_ = propose_batch(ctx, config_.batch, config_.acquisition.direct_evals_per_dim, max_fresh);

  StepRecord record;
  record.step = steps_;
  record.batch_size = config_.batch;
  std::map<std::uint32_t, RealizationId> minted;
  for (const EvaluationPoint& z : last_proposal_.elements) {
    RealizationId s = z.s;
    if (s.is_fresh()) {
      auto it = minted.find(s.index());
      if (it == minted.end()) it = minted.emplace(s.index(), pool_.add(benchmark_.mint())).first;
      s = it->second;
    }
    const double y = benchmark_.evaluate(z.x, pool_.handle(s));
    observations_.push_back({z.x, s, y});
    record.proposed.push_back({z.x, s.to_string()});
    record.observed_y.push_back(y);
  }
  cumulative_evals_ += config_.batch;
  record.cumulative_evals = cumulative_evals_;
  record.pool_size = static_cast<int>(pool_.size());

  // The incumbent uses the new data under the hyperparameters of this step.
  try {
    posterior_ = std::make_shared<const HGPPosterior>(standardized(), *params_);
  } catch (const FitError& first) {
    try {
      posterior_ = refit(false);
    } catch (const std::exception& second) {
      abort_run(steps_, first, second);
    }
  }
  fill_outcome(record, benchmark_, recommend_incumbent());
  return record;
}

Point BoshOptimizer::recommend_incumbent() const {
  BOSH_EXPECT(posterior_ != nullptr, "no fitted model");
  const HGPPosterior& post = *posterior_;
  return direct_maximize([&](const Eigen::VectorXd& x) { return post.predict_g(x).mean; }, config_.dim,
                         config_.acquisition.incumbent_evals_per_dim * config_.dim)
      .x;
}

// ---------------------------------------------------------------------------
// Baselines

BaselineOptimizer::BaselineOptimizer(const RunConfig& config, Benchmark& benchmark)
    : config_(config),
      benchmark_(benchmark),
      model_rng_(derive_stream(config.seed, StreamLabel::kModelFit)),
      design_rng_(derive_stream(config.seed, StreamLabel::kDesign)),
      gstar_rng_(derive_stream(config.seed, StreamLabel::kMaxValue)) {
  config_.validate();
  BOSH_EXPECT(config_.method != Method::kBosh, "BaselineOptimizer does not run BOSH");
  BOSH_EXPECT(config_.dim == benchmark.dim(), "config dim does not match the benchmark");
}

void BaselineOptimizer::initialize() {
  const bool single = config_.method == Method::kBatchMesSingle;
  const int k = single ? 1 : config_.batch;
  FixedInit init = initialize_fixed(benchmark_, config_.dim, k, design_rng_, config_.design,
                                    config_.method == Method::kResampled);
  strategy_ = std::move(init.strategy);
  observations_ = std::move(init.observations);
  cumulative_evals_ = init.individual_evals;
  minted_ = init.minted;
  posterior_ = refit(false);
}

std::shared_ptr<const GPPosterior> BaselineOptimizer::refit(bool warm, bool optimize) {
  std::vector<Point> xs;
  std::vector<double> ys;
  for (const StrategyObservation& o : observations_) {
    xs.push_back(o.x);
    ys.push_back(o.y);
  }
  const Standardizer st = Standardizer::fit(ys);
  Eigen::VectorXd targets(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) targets(static_cast<Eigen::Index>(i)) = st.apply(ys[i]);
  if (optimize || !params_) {
    params_ = optimize_hyperparameters(xs, targets, config_.model.bounds, config_.model.n_restarts, model_rng_,
                                       warm ? params_ : std::nullopt);
  }
  return std::make_shared<const GPPosterior>(std::move(xs), std::move(targets), params_->kernel, params_->noise);
}

std::vector<Point> BaselineOptimizer::propose(const GPPosterior& posterior) {
  const int dim = config_.dim;
  const int budget = config_.acquisition.direct_evals_per_dim * dim;
  if (config_.method == Method::kFixedEi) {
    double incumbent = -std::numeric_limits<double>::infinity();
    for (const Point& x : posterior.inputs()) incumbent = std::max(incumbent, posterior.predict(x).mean);
    return {direct_maximize([&](const Eigen::VectorXd& x) { return expected_improvement(x, posterior, incumbent); },
                            dim, budget)
                .x};
  }
  const MaxValueSamples gstar =
      sample_gstar(posterior, config_.acquisition.gstar_samples, config_.acquisition.grid_per_dim * dim, gstar_rng_);
  if (config_.method != Method::kBatchMesSingle) {
    return {direct_maximize([&](const Eigen::VectorXd& x) { return mes(x, posterior, gstar); }, dim, budget).x};
  }
  std::vector<Point> batch;
  for (int slot = 0; slot < config_.batch; ++slot) {
    const MesBatchScorer scorer(posterior, gstar, batch);
    batch.push_back(direct_maximize([&](const Eigen::VectorXd& x) { return scorer.gain(x); }, dim, budget).x);
  }
  return batch;
}

StepRecord BaselineOptimizer::step() {
  BOSH_EXPECT(posterior_ != nullptr, "initialize() must run before step()");
  ++steps_;
  std::shared_ptr<const GPPosterior> model;
  std::vector<Point> batch;
  try {
    model = refit(true);
    batch = propose(*model);
  } catch (const FitError& first) {
    try {
      model = refit(false);
      batch = propose(*model);
    } catch (const std::exception& second) {
      abort_run(steps_, first, second);
    }
  }

  StepRecord record;
  record.step = steps_;
  record.batch_size = config_.batch;
  if (config_.method == Method::kBatchMesSingle) {
    for (const Point& x : batch) {
      const double y = benchmark_.evaluate(x, strategy_.realizations.front());
      observations_.push_back({x, y});
      record.proposed.push_back({x, "0"});
      record.observed_y.push_back(y);
    }
  } else {
    if (config_.method == Method::kResampled) {
      strategy_ = mint_strategy(benchmark_, config_.batch);
      minted_ += config_.batch;
    }
    const double y = strategy_.evaluate(benchmark_, batch.front());
    observations_.push_back({batch.front(), y});
    record.proposed.push_back({batch.front(), "S"});
    record.observed_y.push_back(y);
  }
  cumulative_evals_ += config_.batch;
  record.cumulative_evals = cumulative_evals_;
  record.pool_size = minted_;

  try {
    posterior_ = refit(true, false);
  } catch (const FitError& first) {
    try {
      posterior_ = refit(false);
    } catch (const std::exception& second) {
      abort_run(steps_, first, second);
    }
  }
  fill_outcome(record, benchmark_, recommend_incumbent());
  return record;
}

Point BaselineOptimizer::recommend_incumbent() const {
  BOSH_EXPECT(posterior_ != nullptr, "no fitted model");
  const GPPosterior& post = *posterior_;
  return direct_maximize([&](const Eigen::VectorXd& x) { return post.predict(x).mean; }, config_.dim,
                         config_.acquisition.incumbent_evals_per_dim * config_.dim)
      .x;
}

std::unique_ptr<Optimizer> make_optimizer(const RunConfig& config, Benchmark& benchmark) {
  if (config.method == Method::kBosh) return std::make_unique<BoshOptimizer>(config, benchmark);
  return std::make_unique<BaselineOptimizer>(config, benchmark);
}

RunTrace run_optimization(const RunConfig& config, Benchmark& benchmark) {
  const std::unique_ptr<Optimizer> optimizer = make_optimizer(config, benchmark);
  optimizer->initialize();
  RunTrace trace;
  trace.initial_evals = optimizer->cumulative_evals();
  for (int i = 0; i < config.budget_steps; ++i) trace.steps.push_back(optimizer->step());
  return trace;
}

}  // namespace bosh
