#include "bosh/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "bosh/errors.hpp"

#ifndef BOSH_CODE_VERSION
#define BOSH_CODE_VERSION "unknown"
#endif

namespace bosh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view code_version() { return BOSH_CODE_VERSION; }

RunConfig ExperimentConfig::run_config(const MethodSpec& spec, int rep) const {
  RunConfig rc;
  rc.method = spec.method;
  rc.batch = spec.batch;
  rc.budget_steps = budget_steps;
  rc.dim = benchmark.name == "warehouse" ? 4 : 1;
  rc.seed = run_seed(rep);
  rc.model = model;
  rc.acquisition = acquisition;
  rc.design = design;
  rc.pool_cap = pool_cap;
  return rc;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string default_label(Method method, int batch) {
  const bool strategy = method != Method::kBosh && method != Method::kBatchMesSingle;
  return std::string(method_name(method)) + (strategy ? "_K" : "_B") + std::to_string(batch);
}

std::string allowed_methods() {
  std::string out;
  for (std::string_view name : kMethodNames) out += (out.empty() ? "" : ", ") + std::string(name);
  return out;
}

// Reads typed fields out of one JSON object, collecting errors instead of
// stopping at the first one.
class FieldReader {
 public:
  FieldReader(const json& object, std::string path, std::vector<std::string>& errors)
      : object_(object), path_(std::move(path)), errors_(errors) {}

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void error(const std::string& key, const std::string& msg) const { errors_.push_back(field(key) + ": " + msg); }
  bool has(const std::string& key) const { return object_.contains(key) && !object_.at(key).is_null(); }
  const json& at(const std::string& key) const { return object_.at(key); }

  void integer(const std::string& key, int& out, long long lo, bool required = false) const {
    if (!has(key)) {
      if (required) error(key, "required field is missing");
      return;
    }
    const json& v = at(key);
    if (!v.is_number_integer()) return error(key, "expected an integer");
    const long long value = v.get<long long>();
    if (value < lo || value > std::numeric_limits<int>::max())
      return error(key, "must be >= " + std::to_string(lo) + " (got " + std::to_string(value) + ")");
    out = static_cast<int>(value);
  }

  void real(const std::string& key, double& out, double lo, bool inclusive) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) return error(key, "expected a number");
    const double value = v.get<double>();
    if (!std::isfinite(value) || (inclusive ? value < lo : value <= lo))
      return error(key, std::string("must be ") + (inclusive ? ">= " : "> ") + format_double(lo));
    out = value;
  }

  void string(const std::string& key, std::string& out, bool required = false) const {
    if (!has(key)) {
      if (required) error(key, "required field is missing");
      return;
    }
    if (!at(key).is_string()) return error(key, "expected a string");
    out = at(key).get<std::string>();
  }

  void object(const std::string& key) const {
    if (has(key) && !at(key).is_object()) error(key, "expected an object");
  }

  void reject_unknown(const std::set<std::string>& known) const {
    for (auto it = object_.begin(); it != object_.end(); ++it)
      if (!known.count(it.key())) error(it.key(), "unknown field");
  }

 private:
  const json& object_;
  std::string path_;
  std::vector<std::string>& errors_;
};

void read_range(const FieldReader& r, const std::string& key, double& lo, double& hi) {
  if (!r.has(key)) return;
  const json& v = r.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    return r.error(key, "expected [lo, hi]");
  const double a = v[0].get<double>();
  const double b = v[1].get<double>();
  if (!(a > 0.0) || !(b >= a)) return r.error(key, "need 0 < lo <= hi");
  lo = a;
  hi = b;
}

void parse_benchmark(const json& doc, ExperimentConfig& cfg, std::vector<std::string>& errors) {
  if (!doc.contains("benchmark")) {
    errors.push_back("benchmark: required field is missing");
    return;
  }
  if (!doc["benchmark"].is_object()) {
    errors.push_back("benchmark: expected an object");
    return;
  }
  const FieldReader b(doc["benchmark"], "benchmark", errors);
  b.reject_unknown({"name", "params"});
  b.string("name", cfg.benchmark.name, true);
  if (b.has("name") && cfg.benchmark.name != "synthetic" && cfg.benchmark.name != "warehouse")
    b.error("name", "unknown benchmark '" + cfg.benchmark.name + "' (allowed: synthetic, warehouse)");
  b.object("params");
  const json params = b.has("params") && b.at("params").is_object() ? b.at("params") : json::object();
  const FieldReader p(params, "benchmark.params", errors);
  if (cfg.benchmark.name == "synthetic") {
    SyntheticConfig& s = cfg.benchmark.synthetic;
    p.reject_unknown({"upper_variance", "lower_variance", "lengthscale", "noise", "grid_points"});
    p.real("upper_variance", s.upper_variance, 0.0, false);
    p.real("lower_variance", s.lower_variance, 0.0, true);
    p.real("lengthscale", s.lengthscale, 0.0, false);
    p.real("noise", s.noise, 0.0, true);
    p.integer("grid_points", s.grid_points, 2);
  } else if (cfg.benchmark.name == "warehouse") {
    WarehouseConfig& w = cfg.benchmark.warehouse;
    p.reject_unknown({"truck_speed", "base_rate", "horizon", "location_sd", "reference_evals"});
    p.real("truck_speed", w.truck_speed, 0.0, false);
    p.real("base_rate", w.demand.base_rate, 0.0, true);
    p.real("horizon", w.horizon, 0.0, false);
    p.real("location_sd", w.demand.locations.sd, 0.0, false);
    p.integer("reference_evals", cfg.benchmark.reference_evals, 1);
  }
}

void parse_methods(const json& doc, ExperimentConfig& cfg, std::vector<std::string>& errors) {
  if (!doc.contains("methods")) {
    errors.push_back("methods: required field is missing");
    return;
  }
  if (!doc["methods"].is_array() || doc["methods"].empty()) {
    errors.push_back("methods: expected a non-empty array");
    return;
  }
  static const std::regex label_pattern("[A-Za-z0-9_.-]+");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < doc["methods"].size(); ++i) {
    const std::string path = "methods[" + std::to_string(i) + "]";
    const json& entry = doc["methods"][i];
    if (!entry.is_object()) {
      errors.push_back(path + ": expected an object");
      continue;
    }
    const FieldReader r(entry, path, errors);
    r.reject_unknown({"method", "B_or_K", "label"});
    MethodSpec spec;
    std::string name;
    bool known = false;
    r.string("method", name, true);
    if (r.has("method") && r.at("method").is_string()) {
      if (const std::optional<Method> m = parse_method(name)) {
        spec.method = *m;
        known = true;
      } else {
        r.error("method", "unknown method '" + name + "' (allowed: " + allowed_methods() + ")");
      }
    }
    r.integer("B_or_K", spec.batch, 1, true);
    r.string("label", spec.label);
    // A default label for an unknown method would only add a misleading duplicate error.
    if (spec.label.empty() && !known) continue;
    if (spec.label.empty()) spec.label = default_label(spec.method, spec.batch);
    if (!std::regex_match(spec.label, label_pattern)) r.error("label", "may only contain letters, digits, _ . -");
    if (!labels.insert(spec.label).second) r.error("label", "duplicate label '" + spec.label + "'");
    cfg.methods.push_back(spec);
  }
}

}  // namespace

ConfigResult parse_config(const json& doc) {
  ConfigResult result;
  std::vector<std::string>& errors = result.errors;
  if (!doc.is_object()) {
    errors.push_back("<root>: expected an object");
    return result;
  }
  ExperimentConfig cfg;
  const FieldReader root(doc, "", errors);
  root.reject_unknown({"benchmark", "methods", "repetitions", "budget_steps", "base_seed", "output_dir", "model",
                       "acquisition", "design", "pool_cap"});
  parse_benchmark(doc, cfg, errors);
  parse_methods(doc, cfg, errors);
  root.integer("repetitions", cfg.repetitions, 1);
  root.integer("budget_steps", cfg.budget_steps, 1, true);
  if (root.has("base_seed")) {
    const json& seed = doc["base_seed"];
    if (seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
      cfg.base_seed = seed.get<std::uint64_t>();
    } else {
      root.error("base_seed", "expected a non-negative integer");
    }
  }
  root.string("output_dir", cfg.output_dir);

  root.object("model");
  if (root.has("model") && doc["model"].is_object()) {
    const FieldReader m(doc["model"], "model", errors);
    m.reject_unknown({"n_restarts", "bounds"});
    m.integer("n_restarts", cfg.model.n_restarts, 1);
    m.object("bounds");
    if (m.has("bounds") && m.at("bounds").is_object()) {
      const FieldReader b(m.at("bounds"), "model.bounds", errors);
      HyperparameterBounds& hb = cfg.model.bounds;
      b.reject_unknown({"lengthscale", "variance", "noise"});
      read_range(b, "lengthscale", hb.lengthscale_lo, hb.lengthscale_hi);
      read_range(b, "variance", hb.variance_lo, hb.variance_hi);
      read_range(b, "noise", hb.noise_lo, hb.noise_hi);
    }
  }

  root.object("acquisition");
  if (root.has("acquisition") && doc["acquisition"].is_object()) {
    const FieldReader a(doc["acquisition"], "acquisition", errors);
    a.reject_unknown({"gstar_samples", "grid_per_dim", "direct_evals_per_dim", "incumbent_evals_per_dim"});
    a.integer("gstar_samples", cfg.acquisition.gstar_samples, 1);
    a.integer("grid_per_dim", cfg.acquisition.grid_per_dim, 1);
    a.integer("direct_evals_per_dim", cfg.acquisition.direct_evals_per_dim, 1);
    a.integer("incumbent_evals_per_dim", cfg.acquisition.incumbent_evals_per_dim, 1);
  }

  if (root.has("design")) {
    std::string design;
    root.string("design", design);
    if (design == "quasi_random") {
      cfg.design = DesignKind::kQuasiRandom;
    } else if (design == "uniform") {
      cfg.design = DesignKind::kUniform;
    } else if (doc["design"].is_string()) {
      root.error("design", "unknown design '" + design + "' (allowed: quasi_random, uniform)");
    }
  }
  if (root.has("pool_cap")) {
    int cap = 0;
    root.integer("pool_cap", cap, 2);
    if (cap >= 2) cfg.pool_cap = cap;
  }

  if (errors.empty()) result.config = std::move(cfg);
  return result;
}

ConfigResult validate_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {std::nullopt, {"cannot open config file '" + path.string() + "'"}};
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    return {std::nullopt, {"config is not valid JSON: " + std::string(e.what())}};
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
  json bench = {{"name", cfg.benchmark.name}};
  if (cfg.benchmark.name == "synthetic") {
    const SyntheticConfig& s = cfg.benchmark.synthetic;
    bench["params"] = {{"upper_variance", s.upper_variance},
                       {"lower_variance", s.lower_variance},
                       {"lengthscale", s.lengthscale},
                       {"noise", s.noise},
                       {"grid_points", s.grid_points}};
  } else {
    const WarehouseConfig& w = cfg.benchmark.warehouse;
    bench["params"] = {{"truck_speed", w.truck_speed},
                       {"base_rate", w.demand.base_rate},
                       {"horizon", w.horizon},
                       {"location_sd", w.demand.locations.sd},
                       {"reference_evals", cfg.benchmark.reference_evals}};
  }
  json methods = json::array();
  for (const MethodSpec& m : cfg.methods)
    methods.push_back({{"method", std::string(method_name(m.method))}, {"B_or_K", m.batch}, {"label", m.label}});
  const HyperparameterBounds& hb = cfg.model.bounds;
  return {
      {"benchmark", bench},
      {"methods", methods},
      {"repetitions", cfg.repetitions},
      {"budget_steps", cfg.budget_steps},
      {"base_seed", cfg.base_seed},
      {"output_dir", cfg.output_dir},
      {"model",
       {{"n_restarts", cfg.model.n_restarts},
        {"bounds",
         {{"lengthscale", {hb.lengthscale_lo, hb.lengthscale_hi}},
          {"variance", {hb.variance_lo, hb.variance_hi}},
          {"noise", {hb.noise_lo, hb.noise_hi}}}}}},
      {"acquisition",
       {{"gstar_samples", cfg.acquisition.gstar_samples},
        {"grid_per_dim", cfg.acquisition.grid_per_dim},
        {"direct_evals_per_dim", cfg.acquisition.direct_evals_per_dim},
        {"incumbent_evals_per_dim", cfg.acquisition.incumbent_evals_per_dim}}},
      {"design", cfg.design == DesignKind::kQuasiRandom ? "quasi_random" : "uniform"},
      {"pool_cap", cfg.pool_cap ? json(*cfg.pool_cap) : json(nullptr)},
  };
}

// ---------------------------------------------------------------------------
// Trace serialization

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, end);
}

std::string format_point(const Point& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ';';
    out += format_double(x(i));
  }
  return out;
}

std::string format_trace_rows(const std::string& label, int rep, const RunTrace& trace) {
  std::string out;
  for (const StepRecord& r : trace.steps) {
    std::string proposed;
    for (std::size_t j = 0; j < r.proposed.size(); ++j) {
      if (j) proposed += '|';
      proposed += format_point(r.proposed[j].x) + "@" + r.proposed[j].realization;
    }
    std::string observed;
    for (std::size_t j = 0; j < r.observed_y.size(); ++j) {
      if (j) observed += ';';
      observed += format_double(r.observed_y[j]);
    }
    out += label + ',' + std::to_string(rep) + ',' + std::to_string(r.step) + ',' +
           std::to_string(r.cumulative_evals) + ',' + std::to_string(r.batch_size) + ',' +
           std::to_string(r.pool_size) + ',' + proposed + ',' + observed + ',' + format_point(r.incumbent) + ',' +
           format_double(r.true_value) + ',' + format_double(r.suboptimality) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

BenchmarkFactory::BenchmarkFactory(const BenchmarkSpec& spec) : spec_(spec) {
  if (spec_.name == "synthetic") {
    prior_ = std::make_shared<const SyntheticGridPrior>(spec_.synthetic);
  } else if (spec_.name == "warehouse") {
    spec_.warehouse.validate();
    reference_ = warehouse_reference_optimum(spec_.warehouse, spec_.reference_evals);
  } else {
    throw ContractViolation("unknown benchmark '" + spec_.name + "'");
  }
}

std::unique_ptr<Benchmark> BenchmarkFactory::make(std::uint64_t run_seed) const {
  if (prior_) return std::make_unique<SyntheticHGPBenchmark>(prior_, benchmark_seed(run_seed));
  return std::make_unique<WarehouseBenchmark>(spec_.warehouse, benchmark_seed(run_seed), reference_);
}

int BenchmarkFactory::dim() const { return prior_ ? 1 : 4; }

namespace {

void write_atomically(const fs::path& target, const std::string& content) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir, int parallel) {
  BOSH_EXPECT(parallel >= 1, "parallel must be >= 1");
  BOSH_EXPECT(!config.methods.empty(), "experiment has no methods");
  fs::create_directories(out_dir / "runs");
  const BenchmarkFactory factory(config.benchmark);

  ExperimentResult result;
  for (const MethodSpec& m : config.methods) {
    for (int rep = 0; rep < config.repetitions; ++rep) {
      RunStatus status;
      status.label = m.label;
      status.method = m.method;
      status.batch = m.batch;
      status.rep = rep;
      status.seed = config.run_seed(rep);
      result.runs.push_back(status);
    }
  }
  auto run_file = [&](const RunStatus& s) { return out_dir / "runs" / (s.label + "_rep" + std::to_string(s.rep) + ".csv"); };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.runs.size(); i = next++) {
      RunStatus& status = result.runs[i];
      const MethodSpec& spec = config.methods[i / static_cast<std::size_t>(config.repetitions)];
      try {
        const std::unique_ptr<Benchmark> bench = factory.make(status.seed);
        const RunTrace trace = run_optimization(config.run_config(spec, status.rep), *bench);
        write_atomically(run_file(status), format_trace_rows(status.label, status.rep, trace));
        status.steps = static_cast<int>(trace.steps.size());
        status.ok = true;
      } catch (const std::exception& e) {
        status.error = e.what();
      }
    }
  };
  const int threads = std::min<int>(parallel, static_cast<int>(result.runs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::string csv = std::string(kTraceHeader) + '\n';
  json runs = json::array();
  for (const RunStatus& s : result.runs) {
    if (s.ok) csv += read_file(run_file(s));
    runs.push_back({{"label", s.label},
                    {"method", std::string(method_name(s.method))},
                    {"B_or_K", s.batch},
                    {"rep", s.rep},
                    {"seed", s.seed},
                    {"benchmark_seed", benchmark_seed(s.seed)},
                    {"status", s.ok ? "ok" : "failed"},
                    {"steps", s.steps},
                    {"error", s.ok ? json(nullptr) : json(s.error)}});
  }
  result.trace_path = out_dir / "trace.csv";
  write_atomically(result.trace_path, csv);

  json manifest = {{"code_version", std::string(code_version())},
                   {"config", to_json(config)},
                   {"trace", "trace.csv"},
                   {"seed_rule", "run seed = base_seed + rep; component streams derived from the run seed"},
                   {"runs", runs}};
  if (factory.reference()) {
    manifest["reference_optimum"] = {{"x", std::vector<double>(factory.reference()->x.data(),
                                                               factory.reference()->x.data() + 4)},
                                     {"value", factory.reference()->value},
                                     {"exact", factory.reference()->exact}};
  }
  result.manifest_path = out_dir / "manifest.json";
  write_atomically(result.manifest_path, manifest.dump(2) + '\n');
  return result;
}

}  // namespace bosh
