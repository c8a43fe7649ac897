#ifndef FAIRLAB_ENVIRONMENTS_HPP
#define FAIRLAB_ENVIRONMENTS_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "fairlab/benchmark.hpp"
#include "fairlab/core.hpp"
#include "fairlab/learners.hpp"

namespace fairlab {

/// i.i.d. batches from a joint distribution over (x, y). `joint` is n x 2 with
/// joint(x, y) = P(x, y); entries must be nonnegative and sum to one.
class StochasticEnv final : public Environment {
 public:
  StochasticEnv(Eigen::MatrixXd joint, int k, std::uint64_t seed);

  /// Uniform marginal over instances with P(y = 1 | x) = label_prob[x].
  static StochasticEnv uniform(const Eigen::VectorXd& label_prob, int k,
                               std::uint64_t seed);

  EnvironmentRound next(Index t, const Eigen::VectorXd& deployed) override;
  bool is_stochastic() const override { return true; }

  const Eigen::MatrixXd& joint() const { return joint_; }
  Eigen::VectorXd marginal() const { return joint_.rowwise().sum(); }
  /// E_{(x,y)~D} |pi(x) - y| for a prediction vector.
  double expected_loss(const Eigen::VectorXd& preds) const;

 private:
  Eigen::MatrixXd joint_;
  int k_;
  std::mt19937_64 rng_;
  std::discrete_distribution<int> cells_;
};

/// Replays a fixed list of rounds; round t uses entry t - 1. It ignores the
/// deployed policy, so it is oblivious but not i.i.d.
class ScriptedEnv final : public Environment {
 public:
  explicit ScriptedEnv(std::vector<EnvironmentRound> rounds);

  EnvironmentRound next(Index t, const Eigen::VectorXd& deployed) override;
  Index length() const { return static_cast<Index>(rounds_.size()); }

 private:
  std::vector<EnvironmentRound> rounds_;
};

/// Uniform average of the deployed policies pi^1..pi^T.
Policy average_policy(const RunTrace& trace);

/// beta(pi, a) = P_{x, x' ~ D_X i.i.d.}[|pi(x) - pi(x')| > d(x, x') + a],
/// summed exactly over the ordered product (self-pairs included).
double empirical_beta(const Eigen::VectorXd& preds,
                      const Eigen::VectorXd& marginal, const SimilarityFn& d,
                      double a);

/// beta(avg_t pi^t, alpha' + q/T) <= (1/q) sum_t beta(pi^t, alpha') where
/// T = preds.size(). Exact arithmetic up to 1e-12.
BoundCheck covering_check(const std::vector<Eigen::VectorXd>& preds, Index q,
                          const Eigen::VectorXd& marginal,
                          const SimilarityFn& d, double alpha_prime);

/// beta(avg_t pi^t, alpha') <= sum_t beta(pi^t, alpha').
BoundCheck naive_composition_check(const std::vector<Eigen::VectorXd>& preds,
                                   const Eigen::VectorXd& marginal,
                                   const SimilarityFn& d, double alpha_prime);

struct GeneralizationReport {
  Index q = 0;
  double delta = 0.0;

  double expected_loss_avg = 0.0;        // E_D l(pi^avg)
  double fair_expected_loss = 0.0;       // min over Q_alpha(D) of E_D l
  double lagrangian_regret_vs_fair = 0.0;
  double accuracy_bound = 0.0;

  double threshold = 0.0;                // alpha' + q/T
  double beta_avg = 0.0;                 // beta(pi^avg, alpha' + q/T)
  double beta_star = 0.0;
  double beta_sum = 0.0;                 // sum_t beta(pi^t, alpha')
  double beta_sum_bound = 0.0;

  std::vector<BoundCheck> checks;
  bool all_pass() const;
};

/// Generalization guarantees for the average policy of a stochastic run:
///   accuracy        E_D l(pi^avg) <= min_{Q_alpha(D)} E_D l
///                                    + LagReg_Q / (kT) + sqrt(8 ln(4/delta) / T)
///   fairness        beta(pi^avg, alpha' + q/T) <= (LagReg_Q + sqrt(2T ln(2/delta))) / q
///   bounded_sum     sum_t beta(pi^t, alpha') <= LagReg_Q + sqrt(2T ln(2/delta))
///   covering        the deterministic averaging inequality above
///   loss_linearity  E_D l(pi^avg) equals the mean of E_D l(pi^t)
/// Q_alpha(D) here is the set of policies alpha-fair on every pair in the
/// support of D. Throws std::logic_error for environments that are not i.i.d.
GeneralizationReport generalization_report(const RunTrace& trace,
                                           const HypothesisClass& cls,
                                           const RunConfig& config,
                                           const Environment& environment,
                                           const SimilarityFn& d,
                                           const RegretReport& regret);

}  // namespace fairlab

#endif  // FAIRLAB_ENVIRONMENTS_HPP
