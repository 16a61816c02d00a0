#include "bosh/numerics.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "bosh/errors.hpp"

namespace bosh {

double log_normal_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic (Mills ratio) expansion; erfc underflows below here.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights
// are total_mass times the squared first eigenvector components.
QuadratureRule golub_welsch(const Eigen::VectorXd& off_diagonal, double total_mass) {
  const Eigen::Index n = off_diagonal.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = off_diagonal(i);
    jacobi(i + 1, i) = off_diagonal(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = total_mass * v0 * v0;
  }
  return rule;
}

template <typename Builder>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mutex, int n,
                                  Builder build) {
  BOSH_EXPECT(n >= 1, "quadrature order must be positive");
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

constexpr std::array<int, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                         41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::size_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

const QuadratureRule& gauss_hermite_standard(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return cached_rule(cache, mutex, n, [](int order) {
    // Probabilists' Hermite recurrence: x He_k = He_{k+1} + k He_{k-1}.
    Eigen::VectorXd off(order - 1);
    for (int k = 1; k < order; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
    return golub_welsch(off, 1.0);
  });
}

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return cached_rule(cache, mutex, n, [](int order) {
    Eigen::VectorXd off(order - 1);
    for (int k = 1; k < order; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(off, 2.0);
  });
}

HaltonSequence::HaltonSequence(int dim) : dim_(dim), shift_(Eigen::VectorXd::Zero(dim)) {
  BOSH_EXPECT(dim >= 1 && dim <= static_cast<int>(kPrimes.size()),
              "Halton dimension out of supported range");
}

HaltonSequence::HaltonSequence(int dim, Rng& rng) : HaltonSequence(dim) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < dim_; ++i) shift_(i) = unif(rng);
}

Eigen::VectorXd HaltonSequence::point(std::size_t index) const {
  Eigen::VectorXd p(dim_);
  // Index 0 of the raw sequence is the origin; skip it.
  for (int i = 0; i < dim_; ++i) {
    double v = radical_inverse(index + 1, kPrimes[i]) + shift_(i);
    p(i) = v - std::floor(v);
  }
  return p;
}

std::vector<Eigen::VectorXd> HaltonSequence::points(std::size_t count) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(point(i));
  return out;
}

NelderMeadResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                      const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper,
                                      const NelderMeadOptions& options) {
  const Eigen::Index n = start.size();
  BOSH_EXPECT(lower.size() == n && upper.size() == n, "bounds dimension mismatch");
  BOSH_EXPECT((lower.array() <= upper.array()).all(), "lower bound exceeds upper bound");

  int evaluations = 0;
  auto project = [&](Eigen::VectorXd x) {
    return Eigen::VectorXd(x.cwiseMax(lower).cwiseMin(upper));
  };
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(project(start));
  values.push_back(eval(simplex[0]));

  const Eigen::VectorXd width = upper - lower;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (width(i) <= 0.0) continue;  // collapsed coordinate stays fixed
    Eigen::VectorXd v = simplex[0];
    double step = std::min(options.initial_step, 0.5 * width(i));
    v(i) += (v(i) + step <= upper(i)) ? step : -step;
    simplex.push_back(project(v));
    values.push_back(eval(simplex.back()));
  }
  if (simplex.size() == 1) return {simplex[0], values[0], evaluations};

  const std::size_t m = simplex.size();
  std::vector<std::size_t> order(m);
  while (evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[m - 2];

    double spread = 0.0;
    for (std::size_t i = 1; i < m; ++i)
      spread = std::max(spread, (simplex[order[i]] - simplex[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(values[worst]) &&
        std::abs(values[worst] - values[best]) <= options.f_tolerance * (1.0 + std::abs(values[best])) &&
        spread <= options.x_tolerance)
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < m; ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(m - 1);

    const Eigen::VectorXd reflected = project(centroid + (centroid - simplex[worst]));
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = project(centroid + 2.0 * (centroid - simplex[worst]));
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted =
        outside ? project(centroid + 0.5 * (reflected - centroid))
                : project(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = eval(contracted);
    if (f_contracted < std::min(f_reflected, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i < m; ++i) {
      if (i == best) continue;
      simplex[i] = project(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const std::size_t best = static_cast<std::size_t>(best_it - values.begin());
  return {simplex[best], values[best], evaluations};
}

NelderMeadResult multistart_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     int n_restarts, Rng& rng,
                                     const std::optional<Eigen::VectorXd>& first,
                                     const NelderMeadOptions& options) {
  BOSH_EXPECT(n_restarts >= 1, "n_restarts must be at least 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::optional<NelderMeadResult> best;
  for (int r = 0; r < n_restarts; ++r) {
    Eigen::VectorXd start(lower.size());
    if (r == 0 && first) {
      start = *first;
    } else {
      for (Eigen::Index i = 0; i < start.size(); ++i)
        start(i) = lower(i) + unif(rng) * (upper(i) - lower(i));
    }
    NelderMeadResult result = nelder_mead_minimize(objective, start, lower, upper, options);
    if (!best || result.value < best->value) best = std::move(result);
  }
  return *best;
}

}  // namespace bosh
