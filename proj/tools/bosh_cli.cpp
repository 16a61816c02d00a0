// bosh: run, validate and inspect experiment configs.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bosh/experiment.hpp"

namespace {

std::optional<bosh::ExperimentConfig> load(const std::string& path) {
  bosh::ConfigResult result = bosh::validate_config(path);
  for (const std::string& e : result.errors) std::cerr << "config error: " << e << '\n';
  return result.config;
}

void print_point(const bosh::Point& x) {
  std::cout << '[' << bosh::format_point(x) << ']';
}

int cmd_validate(const std::string& path) {
  const auto cfg = load(path);
  if (!cfg) return 2;
  std::cout << bosh::to_json(*cfg).dump(2) << '\n';
  return 0;
}

int cmd_run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed, int parallel) {
  auto cfg = load(path);
  if (!cfg) return 2;
  if (seed) cfg->base_seed = *seed;
  const std::string dir = out.empty() ? cfg->output_dir : out;
  const bosh::ExperimentResult result = bosh::run_experiment(*cfg, dir, parallel);
  int failed = 0;
  for (const bosh::RunStatus& s : result.runs) {
    if (s.ok) continue;
    ++failed;
    std::cerr << "run " << s.label << " rep " << s.rep << " failed: " << s.error << '\n';
  }
  std::cout << "wrote " << result.trace_path.string() << " and " << result.manifest_path.string() << " ("
            << result.runs.size() - failed << "/" << result.runs.size() << " runs ok)\n";
  return failed == 0 ? 0 : 1;
}

int cmd_bench_oracle(const std::string& path, const std::string& event_log) {
  const auto cfg = load(path);
  if (!cfg) return 2;
  if (cfg->benchmark.name == "warehouse") {
    const bosh::WarehouseConfig& base = cfg->benchmark.warehouse;
    if (!event_log.empty()) {
      std::ofstream log(event_log);
      const bosh::DayOutcome day = bosh::simulate_day(base, bosh::day_seed(cfg->base_seed, 0), &log);
      std::cout << "event log: " << event_log << " (" << day.orders << " orders)\n";
    }
    std::cout << "default layout oracle: " << bosh::format_double(bosh::warehouse_true(base)) << '\n';
    const bosh::Optimum ref = bosh::warehouse_reference_optimum(base, cfg->benchmark.reference_evals);
    std::cout << "reference optimum (DIRECT, " << cfg->benchmark.reference_evals << " oracle calls): x = ";
    print_point(ref.x);
    std::cout << " value = " << bosh::format_double(ref.value) << '\n';
    return 0;
  }
  const bosh::BenchmarkFactory factory(cfg->benchmark);
  for (int rep = 0; rep < cfg->repetitions; ++rep) {
    const std::uint64_t seed = cfg->run_seed(rep);
    const auto bench = factory.make(seed);
    const bosh::Optimum opt = *bench->true_optimum();
    std::cout << "rep " << rep << " seed " << seed << ": x* = ";
    print_point(opt.x);
    std::cout << " g* = " << bosh::format_double(opt.value) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization over stochastic objective realizations"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int parallel = 1;
  std::string event_log;

  CLI::App* run = app.add_subcommand("run", "run every method x repetition of a config");
  run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory (defaults to output_dir from the config)");
  run->add_option("--seed", seed, "override base_seed");
  run->add_option("--parallel", parallel, "repetitions to run concurrently")->check(CLI::PositiveNumber);

  CLI::App* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
  validate->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI::App* oracle = app.add_subcommand("bench-oracle", "print true optimum values for the configured benchmark");
  oracle->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--event-log", event_log, "warehouse: write one simulated day as JSON lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, seed, parallel);
    if (*validate) return cmd_validate(config);
    return cmd_bench_oracle(config, event_log);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
