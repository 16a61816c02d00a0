#include "bosh/direct_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "bosh/errors.hpp"

namespace bosh {

namespace {

struct Rectangle {
  Eigen::VectorXd center;
  std::vector<int> levels;  // side length along dim i is 3^-levels[i]
  double value;
  double size;              // half diagonal
};

double side_length(int level) { return std::pow(3.0, -level); }

double half_diagonal(const std::vector<int>& levels) {
  std::vector<int> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (int l : sorted) sum += std::pow(9.0, -l);
  return 0.5 * std::sqrt(sum);
}

class DirectSearch {
 public:
  DirectSearch(const Objective& objective, int dim, int max_evals, const DirectOptions& options)
      : objective_(objective), dim_(dim), max_evals_(max_evals), options_(options) {}

  DirectResult run() {
    Rectangle root{Eigen::VectorXd::Constant(dim_, 0.5), std::vector<int>(dim_, 0), 0.0, 0.0};
    root.value = evaluate(root.center);
    root.size = half_diagonal(root.levels);
    rects_.push_back(std::move(root));

    while (evaluations_ + 2 <= max_evals_) {
      const std::vector<std::size_t> selected = potentially_optimal();
      if (selected.empty()) break;
      bool divided = false;
      for (std::size_t idx : selected) {
        if (evaluations_ + 2 > max_evals_) break;
        divided |= divide(idx);
      }
      if (!divided) break;
    }
    return {best_x_, best_value_, evaluations_};
  }

 private:
  double evaluate(const Eigen::VectorXd& x) {
    const double v = objective_(x);
    ++evaluations_;
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "objective returned a non-finite value at x = [";
      for (Eigen::Index i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x(i);
      msg << "]";
      throw OptimizationError(msg.str(), std::vector<double>(x.data(), x.data() + x.size()));
    }
    if (evaluations_ == 1 || v > best_value_) {
      best_value_ = v;
      best_x_ = x;
    }
    return v;
  }

  // One representative per distinct size (best value, lowest index on ties),
  // then the slack-hull test on (size, -value).
  std::vector<std::size_t> potentially_optimal() const {
    std::vector<std::size_t> reps;
    for (std::size_t i = 0; i < rects_.size(); ++i) {
      if (side_length(*std::min_element(rects_[i].levels.begin(), rects_[i].levels.end())) < 1e-15) continue;
      auto it = std::find_if(reps.begin(), reps.end(),
                             [&](std::size_t r) { return rects_[r].size == rects_[i].size; });
      if (it == reps.end()) {
        reps.push_back(i);
      } else if (rects_[i].value > rects_[*it].value) {
        *it = i;
      }
    }
    // Work in minimization form f = -value.
    const double f_min = -best_value_;
    std::vector<std::size_t> selected;
    for (std::size_t j : reps) {
      const double fj = -rects_[j].value;
      const double dj = rects_[j].size;
      double k_low = 0.0;
      double k_high = std::numeric_limits<double>::infinity();
      for (std::size_t i : reps) {
        if (i == j) continue;
        const double fi = -rects_[i].value;
        const double di = rects_[i].size;
        if (di < dj) {
          k_low = std::max(k_low, (fj - fi) / (dj - di));
        } else {
          k_high = std::min(k_high, (fi - fj) / (di - dj));
        }
      }
      if (k_high <= 0.0 || k_low > k_high) continue;
      if (std::isfinite(k_high) && fj - k_high * dj > f_min - options_.epsilon * std::abs(f_min)) continue;
      selected.push_back(j);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
  }

  bool divide(std::size_t index) {
    const std::vector<int> levels = rects_[index].levels;
    const Eigen::VectorXd center = rects_[index].center;
    const int min_level = *std::min_element(levels.begin(), levels.end());
    std::vector<int> long_dims;
    for (int i = 0; i < dim_; ++i)
      if (levels[i] == min_level) long_dims.push_back(i);
    const int affordable = (max_evals_ - evaluations_) / 2;
    if (affordable <= 0) return false;
    if (static_cast<int>(long_dims.size()) > affordable) long_dims.resize(affordable);

    const double delta = side_length(min_level) / 3.0;
    struct Probe {
      int dim;
      Eigen::VectorXd plus, minus;
      double f_plus, f_minus;
    };
    std::vector<Probe> probes;
    for (int i : long_dims) {
      Probe p{i, center, center, 0.0, 0.0};
      p.plus(i) += delta;
      p.minus(i) -= delta;
      p.f_plus = evaluate(p.plus);
      p.f_minus = evaluate(p.minus);
      probes.push_back(std::move(p));
    }
    // Best probes are split first so they end up in the largest children.
    std::stable_sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& b) {
      return std::max(a.f_plus, a.f_minus) > std::max(b.f_plus, b.f_minus);
    });
    std::vector<int> current = levels;
    for (const Probe& p : probes) {
      current[p.dim] += 1;
      const double size = half_diagonal(current);
      rects_.push_back({p.plus, current, p.f_plus, size});
      rects_.push_back({p.minus, current, p.f_minus, size});
    }
    rects_[index].levels = current;
    rects_[index].size = half_diagonal(current);
    return true;
  }

  const Objective& objective_;
  int dim_;
  int max_evals_;
  DirectOptions options_;
  std::vector<Rectangle> rects_;
  int evaluations_ = 0;
  Eigen::VectorXd best_x_;
  double best_value_ = -std::numeric_limits<double>::infinity();
};

}  // namespace

DirectResult direct_maximize(const Objective& objective, int dim, int max_evals, const DirectOptions& options) {
  BOSH_EXPECT(dim >= 1, "DIRECT needs dim >= 1");
  BOSH_EXPECT(max_evals >= 1, "DIRECT needs max_evals >= 1");
  return DirectSearch(objective, dim, max_evals, options).run();
}

BatchProposal propose_batch(const AcquisitionContext& ctx, int batch_size, int max_evals_per_dim, int max_fresh) {
  BOSH_EXPECT(batch_size >= 1, "batch size must be at least 1");
  BOSH_EXPECT(max_evals_per_dim >= 1, "DIRECT budget must be positive");
  BOSH_EXPECT(ctx.posterior != nullptr && !ctx.candidates.empty(), "context needs a posterior and candidates");
  const int dim = static_cast<int>(ctx.posterior->dim());
  const int budget = max_evals_per_dim * dim;

  BatchProposal proposal;
  std::uint32_t fresh_used = 0;
  for (int slot = 0; slot < batch_size; ++slot) {
    const BoshBatchScorer scorer(ctx, proposal.elements);
    std::optional<EvaluationPoint> best;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (RealizationId candidate : ctx.candidates) {
      if (candidate.is_fresh() && max_fresh >= 0 && static_cast<int>(fresh_used) >= max_fresh) continue;
      const RealizationId s = candidate.is_fresh() ? RealizationId::fresh(fresh_used) : candidate;
      const DirectResult r = direct_maximize(
          [&](const Eigen::VectorXd& x) { return scorer.gain({x, s}); }, dim, budget);
      proposal.objective_evaluations += r.evaluations;
      if (!best || r.value > best_gain) {
        best = EvaluationPoint{r.x, s};
        best_gain = r.value;
      }
    }
    BOSH_EXPECT(best.has_value(), "no admissible candidate for a batch slot");
    if (best->s.is_fresh()) ++fresh_used;
    proposal.elements.push_back(*best);
  }
  proposal.score = bosh_batch_score(proposal.elements, ctx);
  return proposal;
}

}  // namespace bosh
