#ifndef FAIRLAB_CORE_HPP
#define FAIRLAB_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairlab {

using Index = Eigen::Index;

/// Finite instance space. Instances are the dense indices 0..n-1; feature
/// vectors (one row per instance) are optional and only used to build
/// similarity tables and for display.
class Universe {
 public:
  explicit Universe(Index size);
  explicit Universe(Eigen::MatrixXd features);

  Index size() const { return size_; }
  bool has_features() const { return features_.rows() == size_; }
  const Eigen::MatrixXd& features() const { return features_; }

  bool contains(Index x) const { return x >= 0 && x < size_; }

 private:
  Index size_;
  Eigen::MatrixXd features_;
};

/// Finite class of binary hypotheses, stored as an n x |H| prediction table
/// with entries in {0, 1}. Column h is hypothesis h evaluated on every
/// instance, so a policy's predictions are `table() * weights`.
class HypothesisClass {
 public:
  /// Validates that entries are binary and columns are distinct. Does not
  /// append anything; see make_table_class for that.
  explicit HypothesisClass(Eigen::MatrixXd table, bool appended_zero = false);

  Index universe_size() const { return table_.rows(); }
  Index size() const { return table_.cols(); }

  const Eigen::MatrixXd& table() const { return table_; }
  auto hypothesis(Index h) const { return table_.col(h); }
  int predict(Index h, Index x) const { return table_(x, h) > 0.5 ? 1 : 0; }

  bool contains_constant_zero() const { return zero_index_.has_value(); }
  std::optional<Index> constant_zero_index() const { return zero_index_; }
  /// True when the constant-zero hypothesis was added by the constructor
  /// helper rather than supplied by the caller.
  bool appended_zero() const { return appended_zero_; }

 private:
  Eigen::MatrixXd table_;
  std::optional<Index> zero_index_;
  bool appended_zero_ = false;
};

/// A point in the simplex over a hypothesis class.
class Policy {
 public:
  static constexpr double kSimplexTolerance = 1e-12;

  Policy() = default;
  /// Throws std::invalid_argument unless weights are nonnegative and sum to
  /// one within kSimplexTolerance.
  explicit Policy(Eigen::VectorXd weights);

  static Policy uniform(Index num_hypotheses);
  static Policy point_mass(Index num_hypotheses, Index h);
  /// Clips tiny negatives from numerical solvers and renormalizes.
  static Policy from_nonnegative(Eigen::VectorXd weights);

  const Eigen::VectorXd& weights() const { return weights_; }
  Index size() const { return weights_.size(); }
  double operator[](Index h) const { return weights_[h]; }

  bool operator==(const Policy& other) const {
    return weights_.size() == other.weights_.size() &&
           weights_ == other.weights_;
  }

 private:
  Eigen::VectorXd weights_;
};

/// Symmetric nonnegative dissimilarity table with zero diagonal. The triangle
/// inequality is not required.
class SimilarityFn {
 public:
  SimilarityFn() = default;
  explicit SimilarityFn(Eigen::MatrixXd table);

  static SimilarityFn zeros(Index n) {
    return SimilarityFn(Eigen::MatrixXd::Zero(n, n));
  }

  Index size() const { return table_.rows(); }
  double operator()(Index x, Index x2) const { return table_(x, x2); }
  const Eigen::MatrixXd& table() const { return table_; }
  double max() const { return table_.size() ? table_.maxCoeff() : 0.0; }

 private:
  Eigen::MatrixXd table_;
};

/// k arrivals of one round: instance indices and binary labels.
struct Batch {
  std::vector<Index> xs;
  std::vector<int> ys;

  Index size() const { return static_cast<Index>(xs.size()); }
  /// Throws std::invalid_argument if |xs| != |ys|, k < min_size, a label is
  /// not binary, or an instance is outside [0, n).
  void validate(Index n, Index min_size = 2) const;
};

/// Ordered pair of batch positions flagged by an auditor or chosen by the
/// environment.
struct FlaggedPair {
  Index first = 0;
  Index second = 0;
  bool operator==(const FlaggedPair&) const = default;
};

/// Either no pair (std::nullopt) or one flagged pair of batch positions.
using AuditOutcome = std::optional<FlaggedPair>;

void validate_outcome(const AuditOutcome& rho, Index k);

/// Which penalty bound the configured C is meant to satisfy.
enum class PenaltyTarget {
  kAccuracy,  // C >= 1/eps
  kFairness,  // C >= (k+1)/eps
};

/// Smallest integer penalty for the target, robust to round-off in the
/// division (e.g. 5/0.2).
int minimum_penalty(PenaltyTarget target, int k, double epsilon);

struct RunConfig {
  Index T = 100;
  int k = 4;
  double alpha_prime = 0.3;
  double epsilon = 0.2;
  double alpha = 0.1;  // alpha_prime - epsilon
  int C = 25;
  PenaltyTarget target = PenaltyTarget::kFairness;
  double gamma = 0.0;   // <= 0 selects sqrt(ln|H| / T)
  double omega = 0.0;   // <= 0 selects the bound-equalizing rate
  double delta = 0.05;
  Index q = 0;          // <= 0 selects ceil(T^{3/4})
  Index dummy_v = 0;
  std::uint64_t seed = 0;

  /// Builds a config with alpha = alpha_prime - epsilon and the minimum C for
  /// the target.
  static RunConfig make(Index T, int k, double alpha_prime, double epsilon,
                        PenaltyTarget target = PenaltyTarget::kFairness);

  /// Throws std::invalid_argument describing the first broken invariant.
  void validate(Index universe_size) const;

  Index default_q() const;
  Index effective_q() const { return q > 0 ? q : default_q(); }
};

// --- Loss functionals -------------------------------------------------------
//
// Each functional has a form taking the full prediction vector (pi(x) for all
// x in the universe) so that it applies equally to a mixed policy
// (`table * w`) and to a single hypothesis (`table.col(h)`).

/// Prediction vector of a policy over the whole universe.
inline Eigen::VectorXd predictions(const Policy& policy,
                                   const HypothesisClass& cls) {
  return cls.table() * policy.weights();
}

double predict(const Policy& policy, const HypothesisClass& cls, Index x);

/// (1-p)*y + p*(1-y).
double loss(double p, int y);

template <typename Derived>
double batch_err(const Eigen::MatrixBase<Derived>& preds, const Batch& batch) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.xs.size(); ++i) {
    const double p = preds[batch.xs[i]];
    total += batch.ys[i] ? 1.0 - p : p;
  }
  return total;
}

double batch_err(const Policy& policy, const HypothesisClass& cls,
                 const Batch& batch);

/// max(0, |pi(x) - pi(x')| - d(x, x') - a).
template <typename Derived>
double violation(const Eigen::MatrixBase<Derived>& preds, Index x, Index x2,
                 const SimilarityFn& d, double a) {
  return std::max(0.0, std::abs(preds[x] - preds[x2]) - d(x, x2) - a);
}

double violation(const Policy& policy, const HypothesisClass& cls, Index x,
                 Index x2, const SimilarityFn& d, double a);

template <typename Derived>
int unfair_loss(const Eigen::MatrixBase<Derived>& preds, const Batch& batch,
                const AuditOutcome& rho, const SimilarityFn& d, double a) {
  if (!rho) return 0;
  const Index x = batch.xs[rho->first];
  const Index x2 = batch.xs[rho->second];
  return violation(preds, x, x2, d, a) > 0.0 ? 1 : 0;
}

int unfair_loss(const Policy& policy, const HypothesisClass& cls,
                const Batch& batch, const AuditOutcome& rho,
                const SimilarityFn& d, double a);

/// Signed fairness term C * (pi(x_rho1) - pi(x_rho2) - a); zero without a
/// flagged pair.
template <typename Derived>
double lagrangian_penalty(const Eigen::MatrixBase<Derived>& preds,
                          const Batch& batch, const AuditOutcome& rho,
                          double C, double a) {
  if (!rho) return 0.0;
  return C * (preds[batch.xs[rho->first]] - preds[batch.xs[rho->second]] - a);
}

template <typename Derived>
double lagrangian(const Eigen::MatrixBase<Derived>& preds, const Batch& batch,
                  const AuditOutcome& rho, double C, double a) {
  return batch_err(preds, batch) + lagrangian_penalty(preds, batch, rho, C, a);
}

double lagrangian(const Policy& policy, const HypothesisClass& cls,
                  const Batch& batch, const AuditOutcome& rho, double C,
                  double a);

/// Per-hypothesis Lagrangian losses for one round (column h of the table).
Eigen::VectorXd hypothesis_lagrangians(const HypothesisClass& cls,
                                       const Batch& batch,
                                       const AuditOutcome& rho, double C,
                                       double a);

/// Per-hypothesis batch misclassification losses for one round.
Eigen::VectorXd hypothesis_errors(const HypothesisClass& cls,
                                  const Batch& batch);

}  // namespace fairlab

#endif  // FAIRLAB_CORE_HPP
