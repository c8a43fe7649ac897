#include "fairlab/benchmark.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "fairlab/simplex.hpp"

namespace fairlab {

BoundCheck make_check(std::string name, double lhs, double rhs, double tolerance) {
  return {std::move(name), lhs, rhs, lhs <= rhs + tolerance};
}

std::vector<InstancePair> fairness_pairs(const std::vector<const Batch*>& batches) {
  std::set<InstancePair> unique;
  for (const Batch* batch : batches) {
    for (Index x : batch->xs)
      for (Index x2 : batch->xs)
        if (x != x2) unique.emplace(x, x2);
  }
  return {unique.begin(), unique.end()};
}

std::vector<InstancePair> fairness_pairs(const RunTrace& trace) {
  std::vector<const Batch*> batches;
  batches.reserve(trace.rounds.size());
  for (const RoundRecord& r : trace.rounds) batches.push_back(&r.batch);
  return fairness_pairs(batches);
}

HindsightSolution minimize_over_fair_policies(const HypothesisClass& cls,
                                              const Eigen::VectorXd& costs,
                                              const std::vector<InstancePair>& pairs,
                                              const SimilarityFn& d, double alpha) {
  const Index m = cls.size();
  if (costs.size() != m) throw std::invalid_argument("one cost per hypothesis expected");
  const auto& table = cls.table();

  // Rows whose largest coefficient cannot exceed the bound are vacuous on the
  // simplex and are left out of the LP.
  std::vector<Index> active;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [x, x2] = pairs[i];
    const double bound = d(x, x2) + alpha;
    if ((table.row(x) - table.row(x2)).maxCoeff() > bound) active.push_back(Index(i));
  }

  // Costs are rescaled to unit magnitude so the solver's absolute pivot
  // tolerance means the same thing for short and long traces.
  const double scale = std::max(1.0, costs.cwiseAbs().maxCoeff());
  LinearProgram<double> lp;
  lp.c = costs / scale;
  lp.A_eq = Eigen::MatrixXd::Ones(1, m);
  lp.b_eq = Eigen::VectorXd::Ones(1);
  lp.A_ub.resize(Index(active.size()), m);
  lp.b_ub.resize(Index(active.size()));
  for (std::size_t r = 0; r < active.size(); ++r) {
    const auto [x, x2] = pairs[std::size_t(active[r])];
    lp.A_ub.row(Index(r)) = table.row(x) - table.row(x2);
    lp.b_ub[Index(r)] = d(x, x2) + alpha;
  }

  HindsightSolution out;
  out.pairs = pairs;
  const LpSolution<double> sol = solve_lp(lp);
  if (sol.status != LpStatus::kOptimal) {
    out.objective = std::numeric_limits<double>::infinity();
    return out;
  }
  out.feasible = true;
  out.policy = Policy::from_nonnegative(sol.x);
  out.objective = costs.dot(out.policy.weights());
  const Eigen::VectorXd preds = predictions(out.policy, cls);
  out.constraint_slacks.resize(Index(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [x, x2] = pairs[i];
    out.constraint_slacks[Index(i)] = d(x, x2) + alpha - (preds[x] - preds[x2]);
  }
  return out;
}

HindsightSolution best_fair_policy(const HypothesisClass& cls,
                                   const std::vector<Batch>& batches,
                                   const SimilarityFn& d, double alpha) {
  Eigen::VectorXd costs = Eigen::VectorXd::Zero(cls.size());
  std::vector<const Batch*> ptrs;
  for (const Batch& b : batches) {
    costs += hypothesis_errors(cls, b);
    ptrs.push_back(&b);
  }
  return minimize_over_fair_policies(cls, costs, fairness_pairs(ptrs), d, alpha);
}

namespace {

Eigen::VectorXd lagrangian_costs(const HypothesisClass& cls, const RunTrace& trace,
                                 double C, double alpha) {
  Eigen::VectorXd costs = Eigen::VectorXd::Zero(cls.size());
  for (const RoundRecord& r : trace.rounds)
    costs += hypothesis_lagrangians(cls, r.batch, r.audit, C, alpha);
  return costs;
}

bool has_violation(const Eigen::VectorXd& preds, const Batch& batch,
                   const SimilarityFn& d, double a) {
  for (std::size_t i = 0; i < batch.xs.size(); ++i)
    for (std::size_t j = i + 1; j < batch.xs.size(); ++j)
      if (violation(preds, batch.xs[i], batch.xs[j], d, a) > 0.0) return true;
  return false;
}

bool close(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
}

}  // namespace

HindsightSolution best_lagrangian_policy(const HypothesisClass& cls,
                                         const RunTrace& trace, double C,
                                         double alpha) {
  return minimize_over_fair_policies(cls, lagrangian_costs(cls, trace, C, alpha), {},
                                     SimilarityFn::zeros(cls.universe_size()), alpha);
}

HindsightSolution best_lagrangian_policy(const HypothesisClass& cls,
                                         const RunTrace& trace, double C,
                                         double alpha, const SimilarityFn& d) {
  return minimize_over_fair_policies(cls, lagrangian_costs(cls, trace, C, alpha),
                                     fairness_pairs(trace), d, alpha);
}

std::vector<bool> violating_rounds(const HypothesisClass& cls,
                                   const RunTrace& trace, const SimilarityFn& d,
                                   double a) {
  std::vector<bool> out;
  out.reserve(trace.rounds.size());
  for (const RoundRecord& r : trace.rounds)
    out.push_back(has_violation(predictions(r.policy, cls), r.batch, d, a));
  return out;
}

double compute_R(const HypothesisClass& cls, const RunTrace& trace,
                 const Policy& pi_star, const SimilarityFn& d,
                 double alpha_prime) {
  const std::vector<bool> bad = violating_rounds(cls, trace, d, alpha_prime);
  const Eigen::VectorXd star = predictions(pi_star, cls);
  double total = 0.0;
  for (std::size_t t = 0; t < trace.rounds.size(); ++t) {
    if (bad[t]) continue;
    const RoundRecord& r = trace.rounds[t];
    total += batch_err(predictions(r.policy, cls), r.batch) - batch_err(star, r.batch);
  }
  return total;
}

bool RegretReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const BoundCheck& c) { return c.pass; });
}

const BoundCheck* RegretReport::find(const std::string& name) const {
  for (const BoundCheck& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

RegretReport verify_bounds(const HypothesisClass& cls, const RunTrace& trace,
                           const SimilarityFn& d, const RunConfig& config) {
  if (trace.empty()) throw std::invalid_argument("cannot verify an empty trace");
  const double C = config.C;
  const double alpha = config.alpha;
  const double alpha_prime = config.alpha_prime;
  const std::size_t T = trace.rounds.size();

  RegretReport report;
  std::vector<Eigen::VectorXd> preds(T);
  std::vector<double> lag(T);
  std::vector<bool> bad(T);
  Eigen::VectorXd err_costs = Eigen::VectorXd::Zero(cls.size());
  Eigen::VectorXd clean_costs = Eigen::VectorXd::Zero(cls.size());
  double clean_err = 0.0;
  Index inconsistent = 0;
  Index unsound = 0;

  for (std::size_t t = 0; t < T; ++t) {
    const RoundRecord& r = trace.rounds[t];
    preds[t] = predictions(r.policy, cls);
    const double err = batch_err(preds[t], r.batch);
    lag[t] = lagrangian(preds[t], r.batch, r.audit, C, alpha);
    const int unfair = unfair_loss(preds[t], r.batch, r.env_pair, d, alpha_prime);
    if (!close(r.err, err) || !close(r.lagrangian, lag[t]) || r.unfair != unfair)
      ++inconsistent;

    bad[t] = has_violation(preds[t], r.batch, d, alpha_prime);
    if (r.audit) {
      const Index x = r.batch.xs[r.audit->first];
      const Index x2 = r.batch.xs[r.audit->second];
      if (!(preds[t][x] - preds[t][x2] - d(x, x2) - alpha_prime > 0.0)) ++unsound;
    } else if (bad[t]) {
      ++unsound;
    }

    report.learner_err += err;
    report.learner_lagrangian += lag[t];
    report.cumulative_unfair += r.unfair;
    report.violating_round_count += bad[t];
    const Eigen::VectorXd h_err = hypothesis_errors(cls, r.batch);
    err_costs += h_err;
    if (!bad[t]) {
      clean_costs += h_err;
      clean_err += err;
    }
  }

  const std::vector<InstancePair> pairs = fairness_pairs(trace);
  report.fair_err_opt = minimize_over_fair_policies(cls, err_costs, pairs, d, alpha);
  report.lagrangian_simplex_opt = best_lagrangian_policy(cls, trace, C, alpha);
  report.lagrangian_fair_opt = best_lagrangian_policy(cls, trace, C, alpha, d);
  report.clean_round_opt = minimize_over_fair_policies(cls, clean_costs, pairs, d, alpha);

  report.checks.push_back(make_check("trace_consistency", double(inconsistent), 0.0, 0.0));
  report.checks.push_back(make_check("auditor_sound_complete", double(unsound), 0.0, 0.0));

  const bool fair_feasible = report.fair_err_opt.feasible &&
                             report.lagrangian_fair_opt.feasible &&
                             report.clean_round_opt.feasible;
  report.checks.push_back(make_check("fair_set_nonempty", fair_feasible ? 0.0 : 1.0, 0.0, 0.0));
  if (!fair_feasible) return report;

  const double U = double(report.cumulative_unfair);
  report.misclass_regret = report.learner_err - report.fair_err_opt.objective;
  report.lagrangian_regret_vs_simplex =
      report.learner_lagrangian - report.lagrangian_simplex_opt.objective;
  report.lagrangian_regret_vs_fair =
      report.learner_lagrangian - report.lagrangian_fair_opt.objective;
  report.R_value = clean_err - report.clean_round_opt.objective;

  report.checks.push_back(make_check("lagrangian_dominates", U + report.misclass_regret,
                                     report.lagrangian_regret_vs_simplex));
  report.checks.push_back(make_check("misclass_regret", report.misclass_regret,
                                     report.lagrangian_regret_vs_simplex));

  // Pointwise penalty bound for fair comparators on audited rounds.
  const std::vector<const HindsightSolution*> comparators = {&report.fair_err_opt,
                                                             &report.lagrangian_fair_opt};
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (const HindsightSolution* star : comparators) {
    const Eigen::VectorXd sp = predictions(star->policy, cls);
    for (const RoundRecord& r : trace.rounds) {
      if (!r.audit) continue;
      const Index x = r.batch.xs[r.audit->first];
      const Index x2 = r.batch.xs[r.audit->second];
      const double excess = lagrangian(sp, r.batch, r.audit, C, alpha) -
                            batch_err(sp, r.batch) - C * d(x, x2);
      worst_excess = std::max(worst_excess, excess);
    }
  }
  if (!std::isfinite(worst_excess)) worst_excess = 0.0;
  report.checks.push_back(make_check("fair_policy_lagrangian", worst_excess, 0.0));

  if (config.C >= minimum_penalty(PenaltyTarget::kFairness, config.k, config.epsilon)) {
    report.checks.push_back(make_check("fairness_regret", U,
                                       report.lagrangian_regret_vs_fair - report.R_value));
    double min_gap = std::numeric_limits<double>::infinity();
    for (const HindsightSolution* star : comparators) {
      const Eigen::VectorXd sp = predictions(star->policy, cls);
      for (std::size_t t = 0; t < T; ++t) {
        if (!bad[t]) continue;
        const RoundRecord& r = trace.rounds[t];
        min_gap = std::min(min_gap, lag[t] - lagrangian(sp, r.batch, r.audit, C, alpha));
      }
    }
    if (!std::isfinite(min_gap)) min_gap = 1.0;  // no violating rounds
    report.checks.push_back(make_check("instantaneous_regret", 1.0, min_gap));
  }
  return report;
}

}  // namespace fairlab
