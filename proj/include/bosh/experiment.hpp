#ifndef BOSH_EXPERIMENT_HPP
#define BOSH_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bosh/benchmarks.hpp"
#include "bosh/bo_engine.hpp"

namespace bosh {

std::string_view code_version();

struct BenchmarkSpec {
  std::string name = "synthetic";  // synthetic | warehouse
  SyntheticConfig synthetic;
  WarehouseConfig warehouse;
  // Oracle calls DIRECT may spend on the warehouse reference optimum.
  int reference_evals = 200;
};

struct MethodSpec {
  Method method = Method::kBosh;
  int batch = 1;
  std::string label;
};

struct ExperimentConfig {
  BenchmarkSpec benchmark;
  std::vector<MethodSpec> methods;
  int repetitions = 20;
  int budget_steps = 0;
  std::uint64_t base_seed = 0;
  std::string output_dir = "results";
  ModelConfig model;
  AcquisitionConfig acquisition;
  DesignKind design = DesignKind::kQuasiRandom;
  std::optional<int> pool_cap;

  RunConfig run_config(const MethodSpec& spec, int rep) const;
  std::uint64_t run_seed(int rep) const { return base_seed + static_cast<std::uint64_t>(rep); }
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  // Every problem found, each prefixed with the offending field.
  std::vector<std::string> errors;
};

ConfigResult parse_config(const nlohmann::json& document);
ConfigResult validate_config(const std::filesystem::path& path);

// The fully resolved config with every default written out.
nlohmann::json to_json(const ExperimentConfig& config);

// Shortest decimal that parses back to the same double.
std::string format_double(double value);

inline constexpr const char* kTraceHeader =
    "method,rep,step,cumulative_evals,batch_size,pool_size,proposed,observed_y,incumbent_x,true_value,"
    "suboptimality";

std::string format_point(const Point& x);
std::string format_trace_rows(const std::string& label, int rep, const RunTrace& trace);

// Benchmark state shared read-only across the runs of one experiment.
class BenchmarkFactory {
 public:
  explicit BenchmarkFactory(const BenchmarkSpec& spec);

  std::unique_ptr<Benchmark> make(std::uint64_t run_seed) const;
  int dim() const;
  // Warehouse only: the DIRECT reference optimum of the oracle (computed once).
  const std::optional<Optimum>& reference() const { return reference_; }

 private:
  BenchmarkSpec spec_;
  std::shared_ptr<const SyntheticGridPrior> prior_;
  std::optional<Optimum> reference_;
};

struct RunStatus {
  std::string label;
  Method method = Method::kBosh;
  int batch = 1;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int steps = 0;
};

struct ExperimentResult {
  std::vector<RunStatus> runs;
  std::filesystem::path trace_path;
  std::filesystem::path manifest_path;
};

// Runs every (method, rep) with seed base_seed + rep, up to `parallel` at a
// time. Each run writes its rows to a temp file that is renamed into place;
// trace.csv is assembled afterwards in config order. A failed run is recorded
// in the manifest and contributes no rows.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                int parallel = 1);

}  // namespace bosh

#endif  // BOSH_EXPERIMENT_HPP
