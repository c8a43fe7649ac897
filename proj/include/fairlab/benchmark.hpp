#ifndef FAIRLAB_BENCHMARK_HPP
#define FAIRLAB_BENCHMARK_HPP

#include <string>
#include <utility>
#include <vector>

#include "fairlab/core.hpp"
#include "fairlab/learners.hpp"

namespace fairlab {

/// Absolute slack allowed on every lhs <= rhs comparison, absorbing LP
/// termination error.
inline constexpr double kBoundTolerance = 1e-7;

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

BoundCheck make_check(std::string name, double lhs, double rhs,
                      double tolerance = kBoundTolerance);

using InstancePair = std::pair<Index, Index>;

/// Distinct ordered instance pairs (x, x'), x != x', that arrive together in
/// at least one batch. Both orientations are listed, sorted.
std::vector<InstancePair> fairness_pairs(const std::vector<const Batch*>& batches);
std::vector<InstancePair> fairness_pairs(const RunTrace& trace);

struct HindsightSolution {
  Policy policy;
  double objective = 0.0;
  bool feasible = false;
  std::vector<InstancePair> pairs;
  /// d(x, x') + alpha - (pi(x) - pi(x')) for each entry of `pairs`.
  Eigen::VectorXd constraint_slacks;

  double min_slack() const {
    return constraint_slacks.size() ? constraint_slacks.minCoeff() : 0.0;
  }
};

/// min_{w in simplex} costs^T w  subject to  pi_w(x) - pi_w(x') <= d(x, x') +
/// alpha for every listed pair. Dense simplex method with Bland's rule.
HindsightSolution minimize_over_fair_policies(const HypothesisClass& cls,
                                              const Eigen::VectorXd& costs,
                                              const std::vector<InstancePair>& pairs,
                                              const SimilarityFn& d, double alpha);

/// Most accurate policy in Q_alpha: minimizes the total misclassification
/// loss of `batches` over policies alpha-fair on every batch.
HindsightSolution best_fair_policy(const HypothesisClass& cls,
                                   const std::vector<Batch>& batches,
                                   const SimilarityFn& d, double alpha);

/// Minimizes the summed (C, alpha)-Lagrangian of the trace (with the
/// recorded auditor pairs) over the whole simplex.
HindsightSolution best_lagrangian_policy(const HypothesisClass& cls,
                                         const RunTrace& trace, double C,
                                         double alpha);

/// Same objective restricted to Q_alpha (policies alpha-fair on every batch
/// of the trace).
HindsightSolution best_lagrangian_policy(const HypothesisClass& cls,
                                         const RunTrace& trace, double C,
                                         double alpha, const SimilarityFn& d);

/// Brute force: does pi^t have an a-violation on some pair of its own batch?
std::vector<bool> violating_rounds(const HypothesisClass& cls,
                                   const RunTrace& trace, const SimilarityFn& d,
                                   double a);

/// Sum of Err(pi^t) - Err(pi_star) over rounds where pi^t has no
/// alpha'-violation inside its batch. Empty sums are 0.
double compute_R(const HypothesisClass& cls, const RunTrace& trace,
                 const Policy& pi_star, const SimilarityFn& d,
                 double alpha_prime);

struct RegretReport {
  double learner_err = 0.0;
  double learner_lagrangian = 0.0;
  Index cumulative_unfair = 0;
  Index violating_round_count = 0;

  double misclass_regret = 0.0;               // vs Q_alpha
  double lagrangian_regret_vs_simplex = 0.0;  // vs Delta(H)
  double lagrangian_regret_vs_fair = 0.0;     // vs Q_alpha
  double R_value = 0.0;                       // sup over Q_alpha

  HindsightSolution fair_err_opt;
  HindsightSolution lagrangian_simplex_opt;
  HindsightSolution lagrangian_fair_opt;
  HindsightSolution clean_round_opt;

  std::vector<BoundCheck> checks;

  bool all_pass() const;
  const BoundCheck* find(const std::string& name) const;
};

/// Recomputes every regret quantity from the trace and checks:
///   trace_consistency        recorded err/unfair/lagrangian match recomputation
///   auditor_sound_complete   recorded audits flag violations exactly when
///                            one exists, and only violating pairs
///   lagrangian_dominates     sum Unfair + misclass regret <= Lagrangian regret vs Delta(H)
///   misclass_regret          misclass regret vs Q_alpha <= Lagrangian regret vs Delta(H)
///   fairness_regret          sum Unfair <= Lagrangian regret vs Q_alpha - R
///   fair_policy_lagrangian   L(pi*) <= Err(pi*) + C d(x_rho1, x_rho2) on audited rounds
///   instantaneous_regret     L(pi^t) - L(pi*) >= 1 on every violating round
/// The last two compare against both hindsight solutions in Q_alpha. The
/// fairness_regret and instantaneous_regret checks need C >= (k+1)/eps and
/// are omitted otherwise. Failures are flagged, never thrown.
RegretReport verify_bounds(const HypothesisClass& cls, const RunTrace& trace,
                           const SimilarityFn& d, const RunConfig& config);

}  // namespace fairlab

#endif  // FAIRLAB_BENCHMARK_HPP
