#ifndef BOSH_DIRECT_OPT_HPP
#define BOSH_DIRECT_OPT_HPP

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "bosh/acquisition.hpp"
#include "bosh/hgp_model.hpp"

namespace bosh {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct DirectOptions {
  // Slack in the potentially-optimal test.
  double epsilon = 1e-4;
};

struct DirectResult {
  Eigen::VectorXd x;
  double value;
  int evaluations;
};

// Maximizes objective over [0,1]^d with DIRECT, using at most max_evals
// evaluations. Starts at the box center; the best point only changes on a
// strict improvement. Throws OptimizationError on a non-finite value.
DirectResult direct_maximize(const Objective& objective, int dim, int max_evals, const DirectOptions& options = {});

struct BatchProposal {
  std::vector<EvaluationPoint> elements;
  double score = 0.0;
  // Objective calls spent across every DIRECT run.
  int objective_evaluations = 0;
};

// Greedy batch construction: slot j maximizes the conditional gain of adding
// (x, s) to the first j-1 elements, with one DIRECT run per candidate
// realization. The fresh candidate of slot j gets its own handle, so a batch
// that selects the new realization twice mints two realizations. A
// non-negative max_fresh limits how many slots may pick a fresh id.
BatchProposal propose_batch(const AcquisitionContext& ctx, int batch_size, int max_evals_per_dim,
                            int max_fresh = -1);

}  // namespace bosh

#endif  // BOSH_DIRECT_OPT_HPP
