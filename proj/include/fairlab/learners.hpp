#ifndef FAIRLAB_LEARNERS_HPP
#define FAIRLAB_LEARNERS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fairlab/auditor.hpp"
#include "fairlab/core.hpp"
#include "fairlab/hypotheses.hpp"

namespace fairlab {

// --- Reduction ---------------------------------------------------------------

/// Appends C copies of (x_rho1, 0) then C copies of (x_rho2, 1) to the batch;
/// without a flagged pair the copies use the dummy instance v. The result has
/// length k + 2C and its first k entries are the original batch.
Batch reduction_inflate(const Batch& batch, const AuditOutcome& rho, int C,
                        Index v);

// --- Learner interface ---------------------------------------------------------

/// An online batch learner. deploy() is called once per round before the
/// arrivals are revealed; observe() receives that round's inflated batch.
class OnlineLearner {
 public:
  virtual ~OnlineLearner() = default;
  virtual Policy deploy(Index t) = 0;
  virtual void observe(const Batch& inflated) = 0;
  virtual std::string name() const = 0;
};

// --- Exponential weights -------------------------------------------------------

/// Multiplicative weights kept in log space. Each update subtracts
/// (gamma / loss_range) * L(h) from the log-weight of hypothesis h, where L is
/// the batch loss on the inflated batch; with loss_range = C + k this gives
/// the deterministic regret bound loss_range * (ln|H| / gamma + gamma * T).
struct ExpWeightsState {
  Eigen::VectorXd log_weights;
  double gamma = 0.0;
  double loss_range = 1.0;

  static ExpWeightsState uniform(Index num_hypotheses, double gamma,
                                 double loss_range = 1.0);
  Policy policy() const;
};

ExpWeightsState expweights_update(ExpWeightsState state,
                                  const HypothesisClass& cls,
                                  const Batch& inflated);

/// gamma = sqrt(ln|H| / T).
double default_gamma(Index num_hypotheses, Index T);

/// loss_range * (ln|H| / gamma + gamma * T).
double expweights_regret_bound(double loss_range, Index num_hypotheses,
                               double gamma, Index T);

class ExpWeightsLearner final : public OnlineLearner {
 public:
  ExpWeightsLearner(const HypothesisClass& cls, double gamma,
                    double loss_range);

  Policy deploy(Index t) override;
  void observe(const Batch& inflated) override;
  std::string name() const override { return "expweights"; }

  const ExpWeightsState& state() const { return state_; }

 private:
  const HypothesisClass* cls_;
  ExpWeightsState state_;
};

// --- Context-FTPL --------------------------------------------------------------

/// Follow-the-perturbed-leader over the lifted separator. The loss of a base
/// policy psi_h on an inflated batch is the linear encoding
/// <(h(x'_1), ..., h(x'_k')), 1 - 2y'>. Each round draws fresh two-sided
/// exponential (Laplace, rate omega) noise for every coordinate of every
/// lifted separator context and plays the hypothesis minimizing cumulative
/// plus perturbation loss (explicit enumeration; lowest index wins ties).
struct FtplState {
  std::vector<LiftedContext> separator;
  double omega = std::numeric_limits<double>::infinity();
  Index batch_length = 0;            // k' = k + 2C
  Eigen::VectorXd cumulative;        // per-hypothesis linear loss
  double sum_sq_dual_norm = 0.0;     // sum_t ||L(., y'^t)||_*^2
  Index mixture_samples = 1;         // > 1 deploys a uniform mixture
  std::mt19937_64 rng;

  /// Builds the lifted separator from S (which must verify against cls).
  static FtplState make(const HypothesisClass& cls, const SeparatorSet& S,
                        Index dummy_v, Index batch_length, double omega,
                        std::uint64_t seed, Index mixture_samples = 1);

  bool perturbed() const { return std::isfinite(omega); }
};

/// Samples one perturbation and returns the point mass on the perturbed
/// leader (or, with mixture_samples > 1, the uniform mixture of that many
/// independent leaders).
Policy ftpl_policy(FtplState& state, const HypothesisClass& cls);

void ftpl_observe(FtplState& state, const HypothesisClass& cls,
                  const Batch& inflated);

/// Linear loss <(h(x'_tau))_tau, 1 - 2y'> of every hypothesis.
Eigen::VectorXd linear_batch_losses(const HypothesisClass& cls,
                                    const Batch& batch);

/// max over label vectors of the linear loss: the number of 0 labels.
double linear_dual_norm(const Batch& batch);

/// Rate equalizing the two terms of the FTPL bound:
///   omega = sqrt(10 sqrt(s k') ln|H| / (4 k' s sum_sq_estimate)).
/// Returns +infinity when the bound is identically zero (|H| = 1 or s = 0).
double default_omega(Index separator_size, Index batch_length,
                     Index num_hypotheses, double sum_sq_estimate);

/// 4 omega k' s sum_sq + (10 / omega) sqrt(s k') ln|H|.
double ftpl_regret_bound(double omega, Index batch_length,
                         Index separator_size, double sum_sq_dual_norm,
                         Index num_hypotheses);

/// 14 (s k / eps)^{3/4} sqrt(T ln|H|).
double ftpl_fairness_bound(Index separator_size, int k, double epsilon,
                           Index T, Index num_hypotheses);

class FtplLearner final : public OnlineLearner {
 public:
  FtplLearner(const HypothesisClass& cls, FtplState state);

  Policy deploy(Index t) override;
  void observe(const Batch& inflated) override;
  std::string name() const override { return "ftpl"; }

  const FtplState& state() const { return state_; }

 private:
  const HypothesisClass* cls_;
  FtplState state_;
};

/// Always deploys the constant-zero hypothesis. Used as a fair baseline.
class ConstantZeroLearner final : public OnlineLearner {
 public:
  explicit ConstantZeroLearner(const HypothesisClass& cls);

  Policy deploy(Index) override { return policy_; }
  void observe(const Batch&) override {}
  std::string name() const override { return "constant_zero"; }

 private:
  Policy policy_;
};

// --- Protocol ------------------------------------------------------------------

struct EnvironmentRound {
  Batch batch;
  /// Environment's own pair for the fairness loss. When absent the auditor's
  /// pair is used.
  std::optional<AuditOutcome> pair;
};

/// Source of per-round arrivals. It may look at the deployed predictions
/// (adaptive adversary); stochastic environments ignore them.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual EnvironmentRound next(Index t, const Eigen::VectorXd& deployed) = 0;
  virtual bool is_stochastic() const { return false; }
};

struct RoundRecord {
  Index t = 0;  // 1-based
  Policy policy;
  Batch batch;
  AuditOutcome audit;     // auditor's pair, charged in the Lagrangian
  AuditOutcome env_pair;  // environment's pair, charged in Unfair
  double err = 0.0;
  int unfair = 0;
  double lagrangian = 0.0;
};

struct RunTrace {
  std::vector<RoundRecord> rounds;

  Index size() const { return static_cast<Index>(rounds.size()); }
  bool empty() const { return rounds.empty(); }
};

/// Runs the online fair batch protocol for config.T rounds: deploy, receive
/// arrivals, audit at alpha' = alpha + eps, charge Err, Unfair (at alpha', on
/// the environment's pair) and the (C, alpha)-Lagrangian (on the auditor's
/// pair), then feed the inflated batch to the learner.
RunTrace run_fair_online(OnlineLearner& learner, Environment& environment,
                         const Auditor& auditor, const HypothesisClass& cls,
                         const RunConfig& config);

}  // namespace fairlab

#endif  // FAIRLAB_LEARNERS_HPP
