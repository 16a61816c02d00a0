#include "bosh/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "bosh/direct_opt.hpp"
#include "bosh/errors.hpp"

namespace bosh {

namespace {

constexpr std::uint32_t kGLabel = 10;
constexpr std::uint32_t kMintLabel = 11;
constexpr std::uint32_t kNoiseLabel = 12;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void SyntheticConfig::validate() const {
  BOSH_EXPECT(upper_variance > 0.0, "synthetic upper_variance must be positive");
  BOSH_EXPECT(lower_variance >= 0.0, "synthetic lower_variance must be non-negative");
  BOSH_EXPECT(lengthscale > 0.0, "synthetic lengthscale must be positive");
  BOSH_EXPECT(noise >= 0.0, "synthetic noise must be non-negative");
  BOSH_EXPECT(grid_points >= 2, "synthetic grid needs at least two points");
}

SyntheticGridPrior::SyntheticGridPrior(const SyntheticConfig& config) : config_(config) {
  config_.validate();
  const int n = config_.grid_points;
  grid_.resize(n);
  std::vector<Point> points(n);
  for (int i = 0; i < n; ++i) {
    grid_[i] = static_cast<double>(i) / (n - 1);
    points[i] = Point::Constant(1, grid_[i]);
  }
  Eigen::MatrixXd k = matern52_matrix(points, {{config_.lengthscale}, config_.upper_variance});
  k.diagonal().array() += 1e-9 * config_.upper_variance;
  factor_ = CholeskyFactor(k);
}

std::vector<double> SyntheticGridPrior::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(grid_.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd g = factor_.lower().triangularView<Eigen::Lower>() * z;
  return {g.data(), g.data() + g.size()};
}

SyntheticHGPBenchmark::SyntheticHGPBenchmark(const SyntheticConfig& config, std::uint64_t seed)
    : SyntheticHGPBenchmark(std::make_shared<const SyntheticGridPrior>(config), seed) {}

SyntheticHGPBenchmark::SyntheticHGPBenchmark(std::shared_ptr<const SyntheticGridPrior> prior, std::uint64_t seed)
    : prior_(std::move(prior)),
      mint_rng_(derive_stream(seed, kMintLabel)),
      noise_rng_(derive_stream(seed, kNoiseLabel)) {
  BOSH_EXPECT(prior_ != nullptr, "synthetic benchmark needs a grid prior");
  Rng g_rng = derive_stream(seed, kGLabel);
  g_values_ = prior_->sample(g_rng);
}

std::uint64_t SyntheticHGPBenchmark::mint() {
  RealizationState state{Rng(mint_rng_()), {}, {}, Eigen::MatrixXd(0, 0), Eigen::VectorXd(0)};
  realizations_.push_back(std::move(state));
  return realizations_.size() - 1;
}

double SyntheticHGPBenchmark::perturbation(RealizationState& state, double x) const {
  const SyntheticConfig& cfg = prior_->config();
  const double v = cfg.lower_variance;
  if (v == 0.0) return 0.0;
  for (std::size_t i = 0; i < state.xs.size(); ++i)
    if (state.xs[i] == x) return state.values[i];

  const Eigen::Index m = static_cast<Eigen::Index>(state.xs.size());
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i)
    k(i) = matern52_from_distance(std::abs(x - state.xs[i]) / cfg.lengthscale, v);
  Eigen::VectorXd w = m > 0 ? Eigen::VectorXd(state.lower.triangularView<Eigen::Lower>().solve(k)) : k;
  const double mean = m > 0 ? w.dot(state.whitened) : 0.0;
  const double var = std::max(v - w.squaredNorm(), 0.0) + 1e-10 * v;
  const double l = std::sqrt(var);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = normal(state.rng);
  const double value = mean + l * z;

  state.lower.conservativeResize(m + 1, m + 1);
  state.lower.row(m).head(m) = w.transpose();
  state.lower.col(m).setZero();
  state.lower(m, m) = l;
  state.whitened.conservativeResize(m + 1);
  state.whitened(m) = z;
  state.xs.push_back(x);
  state.values.push_back(value);
  return value;
}

double SyntheticHGPBenchmark::evaluate(const Point& x, std::uint64_t realization) {
  BOSH_EXPECT(x.size() == 1, "synthetic benchmark is one-dimensional");
  BOSH_EXPECT(x(0) >= 0.0 && x(0) <= 1.0, "synthetic benchmark input outside [0,1]");
  BOSH_EXPECT(realization < realizations_.size(), "unknown synthetic realization");
  double y = true_value(x) + perturbation(realizations_[realization], x(0));
  const double noise = prior_->config().noise;
  if (noise > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    y += std::sqrt(noise) * normal(noise_rng_);
  }
  return y;
}

double SyntheticHGPBenchmark::true_value(const Point& x) const {
  BOSH_EXPECT(x.size() == 1, "synthetic benchmark is one-dimensional");
  const std::size_t n = g_values_.size();
  const double pos = std::clamp(x(0), 0.0, 1.0) * static_cast<double>(n - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * g_values_[i] + t * g_values_[i + 1];
}

std::optional<Optimum> SyntheticHGPBenchmark::true_optimum() const {
  const auto it = std::max_element(g_values_.begin(), g_values_.end());
  const std::size_t i = static_cast<std::size_t>(it - g_values_.begin());
  return Optimum{Point::Constant(1, prior_->grid()[i]), *it, true};
}

// ---------------------------------------------------------------------------

Intensity DemandModel::intensity() const {
  const double base = base_rate;
  return {[base](double t) {
            return base * (1.0 + std::sin(2.0 * std::numbers::pi * t / 1440.0 - 0.5 * std::numbers::pi));
          },
          2.0 * base};
}

void WarehouseConfig::validate() const {
  for (double v : locations) BOSH_EXPECT(v >= 0.0 && v <= 1.0, "warehouse location outside the unit square");
  BOSH_EXPECT(trucks_per_warehouse >= 1, "need at least one truck per warehouse");
  BOSH_EXPECT(deadline > 0.0 && horizon > 0.0, "deadline and horizon must be positive");
  BOSH_EXPECT(truck_speed > 0.0, "truck speed must be positive");
  BOSH_EXPECT(demand.base_rate >= 0.0, "demand rate must be non-negative");
  BOSH_EXPECT(!demand.locations.centers.empty() && demand.locations.sd > 0.0, "bad order location mixture");
}

WarehouseConfig WarehouseConfig::from_point(const Point& x, WarehouseConfig base) {
  BOSH_EXPECT(x.size() == 4, "warehouse decision vector has four coordinates");
  for (int i = 0; i < 4; ++i) base.locations[i] = x(i);
  base.validate();
  return base;
}

std::vector<Order> poisson_order_stream(std::uint64_t seed, double horizon, const Intensity& intensity,
                                        const LocationMixture& locations) {
  std::vector<Order> orders;
  if (intensity.max_rate <= 0.0) return orders;
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
  Rng rng(seq);
  std::exponential_distribution<double> gap(intensity.max_rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, locations.sd);
  std::uniform_int_distribution<std::size_t> component(0, locations.centers.size() - 1);

  double t = 0.0;
  while (true) {
    t += gap(rng);
    if (t > horizon) break;
    if (unif(rng) * intensity.max_rate >= intensity.rate(t)) continue;
    if (!orders.empty() && t <= orders.back().time) continue;
    const auto& c = locations.centers[component(rng)];
    std::array<double, 2> loc;
    do {
      loc = {c[0] + normal(rng), c[1] + normal(rng)};
    } while (loc[0] < 0.0 || loc[0] > 1.0 || loc[1] < 0.0 || loc[1] > 1.0);
    orders.push_back({t, loc});
  }
  return orders;
}

DayOutcome simulate_day(const WarehouseConfig& config, std::uint64_t seed, std::ostream* event_log) {
  config.validate();
  return dispatch_orders(
      config, poisson_order_stream(seed, config.horizon, config.demand.intensity(), config.demand.locations),
      event_log);
}

DayOutcome dispatch_orders(const WarehouseConfig& config, const std::vector<Order>& orders, std::ostream* event_log) {
  config.validate();
  const std::array<std::array<double, 2>, 2> sites = {
      {{config.locations[0], config.locations[1]}, {config.locations[2], config.locations[3]}}};
  std::array<std::vector<double>, 2> truck_free = {std::vector<double>(config.trucks_per_warehouse, 0.0),
                                                   std::vector<double>(config.trucks_per_warehouse, 0.0)};
  DayOutcome out;
  out.orders = static_cast<int>(orders.size());
  for (const Order& order : orders) {
    std::array<double, 2> dist;
    for (int w = 0; w < 2; ++w)
      dist[w] = std::hypot(order.location[0] - sites[w][0], order.location[1] - sites[w][1]);
    const int w = dist[1] < dist[0] ? 1 : 0;
    // FIFO: the order takes the truck that frees up first.
    auto& trucks = truck_free[w];
    const auto truck = std::min_element(trucks.begin(), trucks.end());
    const double dispatch = std::max(order.time, *truck);
    const double travel = dist[w] / config.truck_speed;
    const double arrival = dispatch + travel;
    *truck = arrival + travel;

    bool on_time = false;
    if (arrival > config.horizon) {
      ++out.undelivered;
    } else if (arrival - order.time <= config.deadline) {
      ++out.on_time;
      on_time = true;
    } else {
      ++out.late;
    }
    if (event_log) {
      *event_log << "{\"time\":" << order.time << ",\"x\":" << order.location[0] << ",\"y\":" << order.location[1]
                 << ",\"warehouse\":" << w << ",\"wait\":" << dispatch - order.time << ",\"travel\":" << travel
                 << ",\"on_time\":" << (on_time ? "true" : "false") << "}\n";
    }
  }
  return out;
}

std::uint64_t day_seed(std::uint64_t seed, int day, bool oracle) {
  const std::uint64_t domain = oracle ? 0x0AC1Eull : 0x0ull;
  return splitmix64(splitmix64(seed ^ (domain << 40)) + static_cast<std::uint64_t>(day));
}

namespace {

double pooled_on_time(const WarehouseConfig& config, int days, std::uint64_t seed, bool oracle,
                      std::ostream* event_log) {
  BOSH_EXPECT(days >= 1, "need at least one simulated day");
  long long orders = 0, on_time = 0;
  for (int d = 0; d < days; ++d) {
    const DayOutcome day = simulate_day(config, day_seed(seed, d, oracle), event_log);
    orders += day.orders;
    on_time += day.on_time;
  }
  return orders == 0 ? 1.0 : static_cast<double>(on_time) / static_cast<double>(orders);
}

}  // namespace

double warehouse_simulate(const WarehouseConfig& config, int days, std::uint64_t seed, std::ostream* event_log) {
  return pooled_on_time(config, days, seed, false, event_log);
}

double warehouse_true(const WarehouseConfig& config) {
  return pooled_on_time(config, kOracleDays, 0, true, nullptr);
}

Optimum warehouse_reference_optimum(const WarehouseConfig& base, int evaluations) {
  const DirectResult r = direct_maximize(
      [&](const Eigen::VectorXd& x) { return warehouse_true(WarehouseConfig::from_point(x, base)); }, 4,
      evaluations);
  return {r.x, r.value, false};
}

WarehouseBenchmark::WarehouseBenchmark(WarehouseConfig base, std::uint64_t seed, std::optional<Optimum> reference)
    : base_(std::move(base)), mint_rng_(derive_stream(seed, kMintLabel)), reference_(std::move(reference)) {
  base_.validate();
}

std::uint64_t WarehouseBenchmark::mint() { return mint_rng_(); }

double WarehouseBenchmark::evaluate(const Point& x, std::uint64_t realization) {
  return warehouse_simulate(WarehouseConfig::from_point(x, base_), 1, realization);
}

double WarehouseBenchmark::true_value(const Point& x) const {
  return warehouse_true(WarehouseConfig::from_point(x, base_));
}

}  // namespace bosh
