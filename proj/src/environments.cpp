#include "fairlab/environments.hpp"

#include <cmath>
#include <stdexcept>

namespace fairlab {

namespace {

std::discrete_distribution<int> cell_distribution(const Eigen::MatrixXd& joint) {
  std::vector<double> cells;
  cells.reserve(std::size_t(joint.size()));
  for (Index x = 0; x < joint.rows(); ++x) {
    cells.push_back(joint(x, 0));
    cells.push_back(joint(x, 1));
  }
  return std::discrete_distribution<int>(cells.begin(), cells.end());
}

}  // namespace

StochasticEnv::StochasticEnv(Eigen::MatrixXd joint, int k, std::uint64_t seed)
    : joint_(std::move(joint)), k_(k), rng_(seed) {
  if (joint_.cols() != 2 || joint_.rows() < 1)
    throw std::invalid_argument("joint distribution must be n x 2");
  if ((joint_.array() < 0.0).any() || !joint_.allFinite())
    throw std::invalid_argument("joint distribution has a negative entry");
  if (std::abs(joint_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("joint distribution must sum to one");
  if (k_ < 2) throw std::invalid_argument("batch size k must be at least 2");
  cells_ = cell_distribution(joint_);
}

StochasticEnv StochasticEnv::uniform(const Eigen::VectorXd& label_prob, int k,
                                     std::uint64_t seed) {
  const Index n = label_prob.size();
  if (n < 1) throw std::invalid_argument("need at least one instance");
  if ((label_prob.array() < 0.0).any() || (label_prob.array() > 1.0).any())
    throw std::invalid_argument("label probabilities must lie in [0, 1]");
  Eigen::MatrixXd joint(n, 2);
  joint.col(0) = (1.0 - label_prob.array()) / double(n);
  joint.col(1) = label_prob / double(n);
  joint /= joint.sum();
  return StochasticEnv(std::move(joint), k, seed);
}

EnvironmentRound StochasticEnv::next(Index, const Eigen::VectorXd&) {
  EnvironmentRound round;
  round.batch.xs.reserve(std::size_t(k_));
  round.batch.ys.reserve(std::size_t(k_));
  for (int i = 0; i < k_; ++i) {
    const int cell = cells_(rng_);
    round.batch.xs.push_back(cell / 2);
    round.batch.ys.push_back(cell % 2);
  }
  return round;
}

double StochasticEnv::expected_loss(const Eigen::VectorXd& preds) const {
  return joint_.col(0).dot(preds) + joint_.col(1).dot((1.0 - preds.array()).matrix());
}

ScriptedEnv::ScriptedEnv(std::vector<EnvironmentRound> rounds)
    : rounds_(std::move(rounds)) {}

EnvironmentRound ScriptedEnv::next(Index t, const Eigen::VectorXd&) {
  if (t < 1 || t > length())
    throw std::out_of_range("scripted environment has no round " + std::to_string(t));
  return rounds_[std::size_t(t - 1)];
}

Policy average_policy(const RunTrace& trace) {
  if (trace.empty()) throw std::invalid_argument("cannot average an empty trace");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(trace.rounds.front().policy.size());
  for (const RoundRecord& r : trace.rounds) sum += r.policy.weights();
  return Policy::from_nonnegative(sum / double(trace.size()));
}

double empirical_beta(const Eigen::VectorXd& preds,
                      const Eigen::VectorXd& marginal, const SimilarityFn& d,
                      double a) {
  const Index n = marginal.size();
  double beta = 0.0;
  for (Index x = 0; x < n; ++x) {
    if (marginal[x] == 0.0) continue;
    for (Index x2 = 0; x2 < n; ++x2)
      if (violation(preds, x, x2, d, a) > 0.0) beta += marginal[x] * marginal[x2];
  }
  return beta;
}

namespace {

Eigen::VectorXd mean_of(const std::vector<Eigen::VectorXd>& preds) {
  if (preds.empty()) throw std::invalid_argument("need at least one round");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(preds.front().size());
  for (const auto& p : preds) mean += p;
  return mean / double(preds.size());
}

double beta_sum(const std::vector<Eigen::VectorXd>& preds,
                const Eigen::VectorXd& marginal, const SimilarityFn& d, double a) {
  double total = 0.0;
  for (const auto& p : preds) total += empirical_beta(p, marginal, d, a);
  return total;
}

}  // namespace

BoundCheck covering_check(const std::vector<Eigen::VectorXd>& preds, Index q,
                          const Eigen::VectorXd& marginal,
                          const SimilarityFn& d, double alpha_prime) {
  const Index T = static_cast<Index>(preds.size());
  if (q < 1 || q > T) throw std::invalid_argument("q must lie in [1, T]");
  const double lhs = empirical_beta(mean_of(preds), marginal, d,
                                    alpha_prime + double(q) / double(T));
  const double rhs = beta_sum(preds, marginal, d, alpha_prime) / double(q);
  return make_check("covering", lhs, rhs, 1e-12);
}

BoundCheck naive_composition_check(const std::vector<Eigen::VectorXd>& preds,
                                   const Eigen::VectorXd& marginal,
                                   const SimilarityFn& d, double alpha_prime) {
  const double lhs = empirical_beta(mean_of(preds), marginal, d, alpha_prime);
  return make_check("naive_composition", lhs, beta_sum(preds, marginal, d, alpha_prime), 1e-12);
}

bool GeneralizationReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

GeneralizationReport generalization_report(const RunTrace& trace,
                                           const HypothesisClass& cls,
                                           const RunConfig& config,
                                           const Environment& environment,
                                           const SimilarityFn& d,
                                           const RegretReport& regret) {
  const auto* env = dynamic_cast<const StochasticEnv*>(&environment);
  if (!environment.is_stochastic() || env == nullptr)
    throw std::logic_error("generalization guarantees need an i.i.d. stochastic environment");
  if (trace.empty()) throw std::invalid_argument("cannot analyse an empty trace");
  if (!regret.lagrangian_fair_opt.feasible)
    throw std::invalid_argument("regret report has no fair comparator");

  const double T = double(trace.size());
  GeneralizationReport out;
  out.q = config.effective_q();
  out.delta = config.delta;
  out.lagrangian_regret_vs_fair = regret.lagrangian_regret_vs_fair;

  std::vector<Eigen::VectorXd> preds;
  preds.reserve(trace.rounds.size());
  double mean_loss = 0.0;
  for (const RoundRecord& r : trace.rounds) {
    preds.push_back(predictions(r.policy, cls));
    mean_loss += env->expected_loss(preds.back());
  }
  mean_loss /= T;

  const Eigen::VectorXd avg = predictions(average_policy(trace), cls);
  const Eigen::VectorXd marginal = env->marginal();
  out.expected_loss_avg = env->expected_loss(avg);

  // Fair comparator over the support of D: every ordered pair of distinct
  // instances with positive mass.
  std::vector<InstancePair> pairs;
  for (Index x = 0; x < marginal.size(); ++x)
    for (Index x2 = 0; x2 < marginal.size(); ++x2)
      if (x != x2 && marginal[x] > 0.0 && marginal[x2] > 0.0) pairs.emplace_back(x, x2);
  Eigen::VectorXd costs(cls.size());
  for (Index h = 0; h < cls.size(); ++h) costs[h] = env->expected_loss(cls.table().col(h));
  const HindsightSolution fair = minimize_over_fair_policies(cls, costs, pairs, d, config.alpha);
  if (!fair.feasible) throw std::invalid_argument("no policy is fair on the support of D");
  out.fair_expected_loss = fair.objective;

  const double lagreg = regret.lagrangian_regret_vs_fair;
  out.accuracy_bound = out.fair_expected_loss + lagreg / (double(config.k) * T) +
                       std::sqrt(8.0 * std::log(4.0 / config.delta) / T);

  out.threshold = config.alpha_prime + double(out.q) / T;
  out.beta_avg = empirical_beta(avg, marginal, d, out.threshold);
  out.beta_sum = beta_sum(preds, marginal, d, config.alpha_prime);
  out.beta_sum_bound = lagreg + std::sqrt(2.0 * T * std::log(2.0 / config.delta));
  out.beta_star = out.beta_sum_bound / double(out.q);

  out.checks.push_back(make_check("accuracy", out.expected_loss_avg, out.accuracy_bound));
  out.checks.push_back(make_check("fairness", out.beta_avg, out.beta_star));
  out.checks.push_back(make_check("bounded_sum", out.beta_sum, out.beta_sum_bound));
  out.checks.push_back(covering_check(preds, out.q, marginal, d, config.alpha_prime));
  out.checks.push_back(make_check("loss_linearity",
                                  std::abs(out.expected_loss_avg - mean_loss), 0.0, 1e-10));
  return out;
}

}  // namespace fairlab
