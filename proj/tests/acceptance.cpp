// Acceptance suite: prints one "A<n> PASS|FAIL" line per criterion and exits
// non-zero when any criterion fails. Pass criterion ids (e.g. "A1 A4") to run
// a subset.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "bosh/acquisition.hpp"
#include "bosh/benchmarks.hpp"
#include "bosh/direct_opt.hpp"
#include "bosh/experiment.hpp"
#include "bosh/hgp_model.hpp"

using namespace bosh;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Point uniform_point(int d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(d);
  for (int j = 0; j < d; ++j) x(j) = u(rng);
  return x;
}

HGPParams random_params(int d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HGPParams p;
  p.lengthscales.assign(d, 0.0);
  for (double& l : p.lengthscales) l = 0.1 + 0.5 * u(rng);
  p.upper_variance = 0.3 + 1.5 * u(rng);
  p.lower_variance = 0.02 + 0.8 * u(rng);
  p.noise = 1e-3 + 0.1 * u(rng);
  return p;
}

std::vector<Observation> random_observations(int n, int d, int realizations, Rng& rng) {
  std::normal_distribution<double> n01;
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i)
    obs.push_back({uniform_point(d, rng), RealizationId::member(static_cast<std::uint32_t>(i % realizations)), n01(rng)});
  return obs;
}

Eigen::VectorXd lengthscale_vector(const HGPParams& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.lengthscales.data(), static_cast<Eigen::Index>(p.dim()));
}

int oracle_tag(RealizationId s) {
  if (s.is_latent()) return oracle::kLatent;
  return s.is_member() ? static_cast<int>(s.index()) : 1000 + static_cast<int>(s.index());
}

AcquisitionContext random_context(int d, int realizations, Rng& rng) {
  std::uniform_int_distribution<int> n_dist(5, 30);
  AcquisitionContext ctx;
  ctx.posterior = std::make_shared<const HGPPosterior>(random_observations(n_dist(rng), d, realizations, rng),
                                                       random_params(d, rng));
  ctx.gstar = sample_gstar(*ctx.posterior, 10, 200 * d, rng);
  for (int s = 0; s < realizations; ++s) ctx.candidates.push_back(RealizationId::member(static_cast<std::uint32_t>(s)));
  ctx.candidates.push_back(RealizationId::fresh());
  return ctx;
}

EvaluationPoint random_element(const AcquisitionContext& ctx, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, ctx.candidates.size() - 1);
  return {uniform_point(static_cast<int>(ctx.posterior->dim()), rng), ctx.candidates[pick(rng)]};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

Outcome a1_oracle_equivalence() {
  Rng rng(101);
  std::uniform_int_distribution<int> n_dist(5, 50);
  std::uniform_int_distribution<int> s_dist(2, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 2;
    const int realizations = s_dist(rng);
    const HGPParams params = random_params(d, rng);
    const std::vector<Observation> obs = random_observations(n_dist(rng), d, realizations, rng);
    const HGPPosterior post = fit_hgp(obs, params);

    std::vector<oracle::AugPoint> train;
    Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      train.push_back({obs[i].x, oracle_tag(obs[i].s)});
      y(static_cast<Eigen::Index>(i)) = obs[i].y;
    }
    const oracle::DenseHgp dense(train, y, lengthscale_vector(params), params.upper_variance, params.lower_variance,
                                 params.noise);
    for (int q = 0; q < 10; ++q) {
      const Point x = uniform_point(d, rng);
      const RealizationId s = q % 5 == 4 ? RealizationId::fresh() : RealizationId::member(q % realizations);
      Eigen::VectorXd mean;
      Eigen::MatrixXd cov;
      dense.joint({{x, oracle_tag(s)}, {x, oracle::kLatent}}, mean, cov);
      const BivariateBelief b = post.joint_predict(x, s);
      const double corr = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
      for (double err : {b.mean_y - mean(0), b.mean_g - mean(1), b.var_y - cov(0, 0), b.var_g - cov(1, 1),
                         b.corr - corr})
        worst = std::max(worst, std::abs(err));
    }
  }
  return {worst <= 1e-8, "max abs error " + fmt(worst) + " over 20 datasets x 10 queries"};
}

Outcome a2_covariance_identities() {
  Rng rng(202);
  std::uniform_int_distribution<int> s_dist(0, 3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + i % 3;
    const HGPParams p = random_params(d, rng);
    const Eigen::VectorXd ls = lengthscale_vector(p);
    const Point x = uniform_point(d, rng);
    const Point x2 = uniform_point(d, rng);
    const auto s = RealizationId::member(s_dist(rng));
    const auto s2 = RealizationId::member(s_dist(rng));
    const double upper = oracle::matern52(x, x2, ls, p.upper_variance);
    const double lower = oracle::matern52(x, x2, ls, p.lower_variance);
    worst = std::max(worst, std::abs(hgp_cov(x, s, x2, s2, p) - (upper + (s == s2 ? lower : 0.0))));
    worst = std::max(worst, std::abs(hgp_cov(x, s, x2, RealizationId::latent(), p) - upper));
    worst = std::max(worst, std::abs(hgp_cov(x, RealizationId::latent(), x2, s2, p) - upper));
  }
  return {worst <= 1e-12, "max abs error " + fmt(worst) + " over 1000 inputs"};
}

Outcome a3_single_element_batch() {
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const AcquisitionContext ctx = random_context(1 + i % 2, 2 + i % 3, rng);
    const EvaluationPoint z = random_element(ctx, rng);
    const std::vector<EvaluationPoint> batch = {z};
    worst = std::max(worst, std::abs(bosh_batch_score(batch, ctx) - mumbo(z, ctx)));
  }
  return {worst <= 1e-10, "max abs difference " + fmt(worst) + " over 100 cases"};
}

Outcome a4_mumbo_correctness() {
  std::vector<double> gammas;
  for (int i = 0; i < 50; ++i) gammas.push_back(-4.0 + 8.0 * i / 49.0);
  const double at_zero = std::abs(max_value_information(0.0, gammas));
  double closed_gap = 0.0;
  for (double g : gammas) {
    const double one[] = {g};
    closed_gap = std::max(closed_gap,
                          std::abs(max_value_information(1.0, one) - max_value_information_closed_form(one)));
  }

  Rng rng(404);
  std::uniform_real_distribution<double> rho_dist(-0.99, 0.99);
  std::uniform_real_distribution<double> gamma_dist(-2.5, 2.5);
  double worst_z = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double rho = rho_dist(rng);
    const double gamma = gamma_dist(rng);
    const oracle::McEstimate mc = oracle::max_value_information_mc(rho, gamma, 1'000'000, 4040 + i);
    const double g[] = {gamma};
    worst_z = std::max(worst_z, std::abs(max_value_information(rho, g) - mc.value) / mc.standard_error);
  }
  const bool pass = at_zero <= 1e-8 && closed_gap <= 1e-4 && worst_z <= 3.0;
  return {pass, "rho=0: " + fmt(at_zero) + ", rho=1 gap: " + fmt(closed_gap) + ", worst MC z-score: " + fmt(worst_z)};
}

Outcome a5_diversity_penalty() {
  Rng rng(505);
  std::uniform_int_distribution<int> size_dist(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  int strict_cases = 0;
  int violations = 0;
  double worst_increase = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    AcquisitionContext ctx = random_context(1 + i % 2, 2 + i % 3, rng);
    // Every fifth posterior has noise above the prior variance.
    if (i % 5 == 4) {
      HGPParams p = ctx.posterior->params();
      p.noise = 1.5 * (p.upper_variance + p.lower_variance);
      ctx.posterior = std::make_shared<const HGPPosterior>(ctx.posterior->observations(), p);
    }
    const HGPParams& p = ctx.posterior->params();
    std::vector<EvaluationPoint> batch;
    const int b = size_dist(rng);
    for (int j = 0; j < b; ++j) batch.push_back(random_element(ctx, rng));
    double individual = 0.0;
    for (const EvaluationPoint& z : batch) individual += mumbo(z, ctx);
    const double penalty = bosh_batch_score(batch, ctx) - individual;
    for (int j = 0; j < b; ++j) {
      std::vector<EvaluationPoint> dup = batch;
      dup.push_back(batch[j]);
      const double dup_penalty = bosh_batch_score(dup, ctx) - individual - mumbo(batch[j], ctx);
      const double increase = dup_penalty - penalty;
      worst_increase = std::max(worst_increase, increase);
      ++checked;
      if (increase > 1e-12) ++violations;
      if (p.noise < p.upper_variance + p.lower_variance) {
        ++strict_cases;
        if (!(increase < 0.0)) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(checked) + " duplications (" + std::to_string(strict_cases) +
                               " strict), largest change in the log-det term " + fmt(worst_increase)};
}

Outcome a6_direct_branin() {
  int outside = 0;
  int calls = 0;
  const DirectResult r = direct_maximize(
      [&](const Eigen::VectorXd& x) {
        ++calls;
        if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) ++outside;
        return -oracle::branin_unit(x(0), x(1));
      },
      2, 500);
  double grid = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i)
    for (int j = 0; j < 1000; ++j) grid = std::max(grid, -oracle::branin_unit(i / 999.0, j / 999.0));
  const double gap = std::abs(r.value - grid);
  return {gap <= 0.05 && calls <= 500 && outside == 0,
          "gap " + fmt(gap) + " after " + std::to_string(calls) + " evaluations, " + std::to_string(outside) +
              " outside the box"};
}

// Per (label, rep): the pool_size and suboptimality columns in step order.
struct RunColumns {
  std::vector<int> pool;
  std::vector<double> suboptimality;
};

std::map<std::pair<std::string, int>, RunColumns> read_trace(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  const std::vector<std::string> header = split(line, ',');
  auto column = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const std::size_t label = column("method"), rep = column("rep"), pool = column("pool_size"),
                    subopt = column("suboptimality");
  std::map<std::pair<std::string, int>, RunColumns> runs;
  while (std::getline(in, line)) {
    const std::vector<std::string> f = split(line, ',');
    RunColumns& r = runs[{f[label], std::stoi(f[rep])}];
    r.pool.push_back(std::stoi(f[pool]));
    r.suboptimality.push_back(std::stod(f[subopt]));
  }
  return runs;
}

constexpr int kReps = 20;
constexpr int kSteps = 30;

// Shared by A7 and A9: BOSH (B=5), fixed-strategy MES with K=5 and K=1 on the
// synthetic benchmark, d=1.
const std::map<std::pair<std::string, int>, RunColumns>& synthetic_study() {
  static const auto runs = [] {
    const nlohmann::json doc = {
        {"benchmark", {{"name", "synthetic"}, {"params", {{"lower_variance", 0.5}}}}},
        {"methods",
         {{{"method", "BOSH"}, {"B_or_K", 5}},
          {{"method", "FIXED_MES"}, {"B_or_K", 5}},
          {{"method", "FIXED_MES"}, {"B_or_K", 1}}}},
        {"repetitions", kReps},
        {"budget_steps", kSteps},
        {"base_seed", 1000}};
    const ConfigResult cfg = parse_config(doc);
    if (!cfg.config) throw std::runtime_error("study config rejected: " + cfg.errors.front());
    const fs::path out = fs::temp_directory_path() / "bosh_acceptance_synthetic";
    fs::remove_all(out);
    const ExperimentResult result = run_experiment(*cfg.config, out, 1);
    for (const RunStatus& s : result.runs)
      if (!s.ok) throw std::runtime_error(s.label + " rep " + std::to_string(s.rep) + " failed: " + s.error);
    return read_trace(result.trace_path);
  }();
  return runs;
}

double final_mean(const std::map<std::pair<std::string, int>, RunColumns>& runs, const std::string& label) {
  double sum = 0.0;
  for (int rep = 0; rep < kReps; ++rep) sum += runs.at({label, rep}).suboptimality.back();
  return sum / kReps;
}

Outcome a7_synthetic_replication() {
  const auto& runs = synthetic_study();
  const double bosh = final_mean(runs, "BOSH_B5");
  const double fixed5 = final_mean(runs, "FIXED_MES_K5");
  const double fixed1 = final_mean(runs, "FIXED_MES_K1");
  return {bosh <= fixed5 && bosh < fixed1,
          "final mean suboptimality BOSH_B5 " + fmt(bosh) + ", FIXED_MES_K5 " + fmt(fixed5) + ", FIXED_MES_K1 " +
              fmt(fixed1)};
}

Outcome a8_variance_reduction() {
  WarehouseConfig c;
  c.truck_speed = 0.02;
  auto variance = [&](int days) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 200; ++seed) v.push_back(warehouse_simulate(c, days, seed));
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / (v.size() - 1);
  };
  const double one = variance(1);
  const double ten = variance(10);
  return {ten < one, "variance " + fmt(one) + " with 1 day, " + fmt(ten) + " with 10 days"};
}

Outcome a9_pool_growth() {
  const auto& runs = synthetic_study();
  int grew = 0;
  int shrank = 0;
  int largest = 0;
  for (int rep = 0; rep < kReps; ++rep) {
    const std::vector<int>& pool = runs.at({"BOSH_B5", rep}).pool;
    if (pool.back() > 2) ++grew;
    for (std::size_t i = 1; i < pool.size(); ++i) shrank += pool[i] < pool[i - 1];
    if (pool.front() < 2) ++shrank;
    largest = std::max(largest, pool.back());
  }
  return {grew >= 15 && shrank == 0, std::to_string(grew) + "/20 runs grew past 2 realizations (largest final pool " +
                                         std::to_string(largest) + "), " + std::to_string(shrank) + " shrinking steps"};
}

Outcome a10_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "bosh_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const nlohmann::json doc = {{"benchmark", {{"name", "synthetic"}}},
                              {"methods",
                               {{{"method", "BOSH"}, {"B_or_K", 3}},
                                {{"method", "RESAMPLED"}, {"B_or_K", 2}},
                                {{"method", "BATCH_MES_SINGLE"}, {"B_or_K", 2}}}},
                              {"repetitions", 3},
                              {"budget_steps", 4},
                              {"model", {{"n_restarts", 1}}},
                              {"acquisition", {{"grid_per_dim", 200}, {"direct_evals_per_dim", 30}}}};
  std::ofstream(root / "config.json") << doc.dump(2);
  const std::string cli = BOSH_CLI_PATH;
  std::vector<std::string> traces;
  for (const auto& [dir, parallel] : std::vector<std::pair<std::string, int>>{{"p1", 1}, {"p3", 3}, {"p3b", 3}}) {
    const std::string cmd = cli + " run --config " + (root / "config.json").string() + " --out " +
                            (root / dir).string() + " --parallel " + std::to_string(parallel) + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
    traces.push_back(slurp(root / dir / "trace.csv"));
  }
  const bool same = traces[0] == traces[1] && traces[1] == traces[2] && !traces[0].empty();
  return {same, "three executions (parallel 1, 3, 3) of " + std::to_string(traces[0].size()) + " bytes " +
                    (same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", a1_oracle_equivalence}, {"A2", a2_covariance_identities}, {"A3", a3_single_element_batch},
      {"A4", a4_mumbo_correctness},  {"A5", a5_diversity_penalty},     {"A6", a6_direct_branin},
      {"A7", a7_synthetic_replication}, {"A8", a8_variance_reduction}, {"A9", a9_pool_growth},
      {"A10", a10_reproducibility}};
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !outcome.pass;
    std::cout << id << ' ' << (outcome.pass ? "PASS" : "FAIL") << ": " << outcome.detail << " [" << fmt(seconds)
              << " s]" << std::endl;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
