#ifndef BOSH_BENCHMARKS_HPP
#define BOSH_BENCHMARKS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bosh/gp_core.hpp"
#include "bosh/random.hpp"

namespace bosh {

struct Optimum {
  Point x;
  double value;
  // False when the value is a numerical estimate rather than the exact maximum.
  bool exact;
};

// A stochastic objective: realizations are minted on demand and evaluated
// through an opaque handle. Instances hold mutable state (realization caches,
// noise streams), so one instance serves one run.
class Benchmark {
 public:
  virtual ~Benchmark() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual std::uint64_t mint() = 0;
  virtual double evaluate(const Point& x, std::uint64_t realization) = 0;
  virtual double true_value(const Point& x) const = 0;
  virtual std::optional<Optimum> true_optimum() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic objective sampled from a hierarchical GP (d = 1).

struct SyntheticConfig {
  double upper_variance = 1.0;
  double lower_variance = 0.5;
  double lengthscale = 0.1;
  double noise = 0.01;
  int grid_points = 1000;

  void validate() const;
};

// Cholesky factor of k_g over the equispaced grid. Independent of the seed,
// so many benchmark instances can share one.
class SyntheticGridPrior {
 public:
  explicit SyntheticGridPrior(const SyntheticConfig& config);

  const SyntheticConfig& config() const { return config_; }
  const std::vector<double>& grid() const { return grid_; }
  // Draw g on the grid from standard normals.
  std::vector<double> sample(Rng& rng) const;

 private:
  SyntheticConfig config_;
  std::vector<double> grid_;
  CholeskyFactor factor_;
};

class SyntheticHGPBenchmark final : public Benchmark {
 public:
  SyntheticHGPBenchmark(const SyntheticConfig& config, std::uint64_t seed);
  SyntheticHGPBenchmark(std::shared_ptr<const SyntheticGridPrior> prior, std::uint64_t seed);

  std::string name() const override { return "synthetic"; }
  int dim() const override { return 1; }
  std::uint64_t mint() override;
  // g(x) + delta_s(x) + eps, with delta_s drawn by exact sequential
  // conditioning on every earlier query of realization s.
  double evaluate(const Point& x, std::uint64_t realization) override;
  double true_value(const Point& x) const override;
  std::optional<Optimum> true_optimum() const override;

  const std::vector<double>& g_values() const { return g_values_; }
  std::size_t realization_count() const { return realizations_.size(); }

 private:
  struct RealizationState {
    Rng rng;
    std::vector<double> xs;
    std::vector<double> values;
    Eigen::MatrixXd lower;     // Cholesky factor of k_f over xs (+ tiny jitter)
    Eigen::VectorXd whitened;  // lower^{-1} values
  };

  double perturbation(RealizationState& state, double x) const;

  std::shared_ptr<const SyntheticGridPrior> prior_;
  std::vector<double> g_values_;
  std::vector<RealizationState> realizations_;
  Rng mint_rng_;
  Rng noise_rng_;
};

// ---------------------------------------------------------------------------
// Two-warehouse facility location simulator (d = 4).

struct Order {
  double time;
  std::array<double, 2> location;
};

// Rate function for the thinning sampler; rate(t) <= max_rate on [0, horizon].
struct Intensity {
  std::function<double(double)> rate;
  double max_rate;
};

// Equal-weight Gaussian mixture truncated to the unit square.
struct LocationMixture {
  std::vector<std::array<double, 2>> centers = {{0.25, 0.7}, {0.75, 0.3}};
  double sd = 0.12;
};

struct DemandModel {
  // lambda(t) = base_rate (1 + sin(2 pi t / 1440 - pi / 2)) orders per minute.
  double base_rate = 0.5;
  LocationMixture locations;

  Intensity intensity() const;
};

struct WarehouseConfig {
  // (x1, y1, x2, y2) in the unit square.
  std::array<double, 4> locations = {0.25, 0.25, 0.75, 0.75};
  int trucks_per_warehouse = 10;
  double deadline = 60.0;   // minutes
  double horizon = 1440.0;  // minutes
  double truck_speed = 0.05;  // units per minute
  DemandModel demand;

  void validate() const;
  static WarehouseConfig from_point(const Point& x, WarehouseConfig base);
};

// Thinning: candidate times at rate max_rate, each kept with probability
// rate(t) / max_rate. Times are strictly increasing and <= horizon.
std::vector<Order> poisson_order_stream(std::uint64_t seed, double horizon, const Intensity& intensity,
                                        const LocationMixture& locations);

struct DayOutcome {
  int orders = 0;
  int on_time = 0;
  int late = 0;
  // Arrival at the customer after the horizon.
  int undelivered = 0;
};

// Serves a time-ordered order list: closest warehouse, first free truck.
DayOutcome dispatch_orders(const WarehouseConfig& config, const std::vector<Order>& orders,
                           std::ostream* event_log = nullptr);

// One simulated day. With event_log set, writes one JSON record per order.
DayOutcome simulate_day(const WarehouseConfig& config, std::uint64_t day_seed, std::ostream* event_log = nullptr);

// Pooled on-time fraction over `days` independent days derived from `seed`.
// Zero orders in total gives 1.0.
double warehouse_simulate(const WarehouseConfig& config, int days, std::uint64_t seed,
                          std::ostream* event_log = nullptr);

inline constexpr int kOracleDays = 100;

// 100-day estimate on a reserved seed stream disjoint from optimization days.
double warehouse_true(const WarehouseConfig& config);

// Seed of day `day` in the stream of `seed`; the oracle uses its own domain.
std::uint64_t day_seed(std::uint64_t seed, int day, bool oracle = false);

// Best oracle value DIRECT finds with `evaluations` oracle calls.
Optimum warehouse_reference_optimum(const WarehouseConfig& base, int evaluations);

class WarehouseBenchmark final : public Benchmark {
 public:
  WarehouseBenchmark(WarehouseConfig base, std::uint64_t seed, std::optional<Optimum> reference = {});

  std::string name() const override { return "warehouse"; }
  int dim() const override { return 4; }
  std::uint64_t mint() override;
  // One simulated day: the realization handle is the day seed.
  double evaluate(const Point& x, std::uint64_t realization) override;
  double true_value(const Point& x) const override;
  std::optional<Optimum> true_optimum() const override { return reference_; }

 private:
  WarehouseConfig base_;
  Rng mint_rng_;
  std::optional<Optimum> reference_;
};

}  // namespace bosh

#endif  // BOSH_BENCHMARKS_HPP
