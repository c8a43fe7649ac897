#include "fairlab/core.hpp"

#include <sstream>

namespace fairlab {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument(what);
}

}  // namespace

Universe::Universe(Index size) : size_(size) {
  if (size < 1) fail("universe size must be at least 1");
}

Universe::Universe(Eigen::MatrixXd features)
    : size_(features.rows()), features_(std::move(features)) {
  if (size_ < 1) fail("universe size must be at least 1");
}

HypothesisClass::HypothesisClass(Eigen::MatrixXd table, bool appended_zero)
    : table_(std::move(table)), appended_zero_(appended_zero) {
  if (table_.rows() < 1) fail("hypothesis class over an empty universe");
  if (table_.cols() < 1) fail("hypothesis class must be nonempty");
  for (Index h = 0; h < table_.cols(); ++h) {
    for (Index x = 0; x < table_.rows(); ++x) {
      const double v = table_(x, h);
      if (v != 0.0 && v != 1.0) {
        std::ostringstream msg;
        msg << "hypothesis " << h << " predicts " << v << " at instance " << x
            << "; predictions must be 0 or 1";
        fail(msg.str());
      }
    }
    for (Index g = 0; g < h; ++g) {
      if (table_.col(g) == table_.col(h)) {
        std::ostringstream msg;
        msg << "hypotheses " << g << " and " << h << " are identical";
        fail(msg.str());
      }
    }
    if (!zero_index_ && table_.col(h).isZero()) zero_index_ = h;
  }
}

Policy::Policy(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) fail("policy over an empty class");
  if ((weights_.array() < 0.0).any()) fail("policy weights must be nonnegative");
  if (std::abs(weights_.sum() - 1.0) > kSimplexTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "policy weights sum to " << weights_.sum() << ", not 1";
    fail(msg.str());
  }
}

Policy Policy::uniform(Index num_hypotheses) {
  if (num_hypotheses < 1) fail("policy over an empty class");
  return Policy(Eigen::VectorXd::Constant(num_hypotheses,
                                          1.0 / double(num_hypotheses)));
}

Policy Policy::point_mass(Index num_hypotheses, Index h) {
  if (h < 0 || h >= num_hypotheses) throw std::out_of_range("hypothesis index");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(num_hypotheses);
  w[h] = 1.0;
  return Policy(std::move(w));
}

Policy Policy::from_nonnegative(Eigen::VectorXd weights) {
  weights = weights.cwiseMax(0.0);
  const double total = weights.sum();
  if (!(total > 0.0)) fail("cannot normalize an all-zero weight vector");
  weights /= total;
  return Policy(std::move(weights));
}

SimilarityFn::SimilarityFn(Eigen::MatrixXd table) : table_(std::move(table)) {
  if (table_.rows() != table_.cols()) fail("similarity table must be square");
  for (Index i = 0; i < table_.rows(); ++i) {
    if (table_(i, i) != 0.0) fail("similarity table must have zero diagonal");
    for (Index j = 0; j < table_.cols(); ++j) {
      if (!(table_(i, j) >= 0.0)) fail("similarity entries must be nonnegative");
      if (table_(i, j) != table_(j, i)) fail("similarity table must be symmetric");
    }
  }
}

void Batch::validate(Index n, Index min_size) const {
  if (xs.size() != ys.size()) fail("batch instances and labels differ in length");
  if (size() < min_size) {
    std::ostringstream msg;
    msg << "batch has " << size() << " arrivals; at least " << min_size
        << " required";
    fail(msg.str());
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < 0 || xs[i] >= n) fail("batch instance out of range");
    if (ys[i] != 0 && ys[i] != 1) fail("batch labels must be 0 or 1");
  }
}

void validate_outcome(const AuditOutcome& rho, Index k) {
  if (!rho) return;
  if (rho->first == rho->second) fail("flagged pair must name two positions");
  if (rho->first < 0 || rho->first >= k || rho->second < 0 || rho->second >= k)
    fail("flagged pair position out of range");
}

int minimum_penalty(PenaltyTarget target, int k, double epsilon) {
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  const double numerator = target == PenaltyTarget::kFairness ? k + 1.0 : 1.0;
  const double ratio = numerator / epsilon;
  // 5/0.2 evaluates to 25 in binary but other ratios land a few ulps above an
  // integer; treat anything within 1e-9 of an integer as that integer.
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest))
    return static_cast<int>(std::max(1.0, nearest));
  return static_cast<int>(std::max(1.0, std::ceil(ratio)));
}

RunConfig RunConfig::make(Index T, int k, double alpha_prime, double epsilon,
                          PenaltyTarget target) {
  RunConfig config;
  config.T = T;
  config.k = k;
  config.alpha_prime = alpha_prime;
  config.epsilon = epsilon;
  config.alpha = alpha_prime - epsilon;
  config.target = target;
  config.C = minimum_penalty(target, k, epsilon);
  return config;
}

void RunConfig::validate(Index universe_size) const {
  if (T < 1) fail("T must be at least 1");
  if (k < 2) fail("k must be at least 2");
  if (!(alpha_prime > 0.0)) fail("alpha_prime must be positive");
  if (!(epsilon > 0.0) || !(epsilon < alpha_prime))
    fail("epsilon must lie in (0, alpha_prime)");
  if (alpha != alpha_prime - epsilon) fail("alpha must equal alpha_prime - epsilon");
  const int required = minimum_penalty(target, k, epsilon);
  if (C < required) {
    std::ostringstream msg;
    msg << "C = " << C << " is below the required " << required;
    fail(msg.str());
  }
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  if (q > T) fail("q must not exceed T");
  if (dummy_v < 0 || dummy_v >= universe_size) fail("dummy_v out of range");
}

Index RunConfig::default_q() const {
  const double q_real = std::ceil(std::pow(double(T), 0.75) - 1e-9);
  return std::clamp<Index>(static_cast<Index>(q_real), 1, T);
}

double predict(const Policy& policy, const HypothesisClass& cls, Index x) {
  if (x < 0 || x >= cls.universe_size()) throw std::out_of_range("instance index");
  if (policy.size() != cls.size()) fail("policy and class sizes differ");
  return cls.table().row(x).dot(policy.weights());
}

double loss(double p, int y) {
  if (!(p >= 0.0 && p <= 1.0)) fail("prediction must lie in [0, 1]");
  if (y != 0 && y != 1) fail("label must be 0 or 1");
  return (1.0 - p) * y + p * (1.0 - y);
}

double batch_err(const Policy& policy, const HypothesisClass& cls,
                 const Batch& batch) {
  return batch_err(predictions(policy, cls), batch);
}

double violation(const Policy& policy, const HypothesisClass& cls, Index x,
                 Index x2, const SimilarityFn& d, double a) {
  return std::max(0.0, std::abs(predict(policy, cls, x) - predict(policy, cls, x2)) -
                           d(x, x2) - a);
}

int unfair_loss(const Policy& policy, const HypothesisClass& cls,
                const Batch& batch, const AuditOutcome& rho,
                const SimilarityFn& d, double a) {
  validate_outcome(rho, batch.size());
  return unfair_loss(predictions(policy, cls), batch, rho, d, a);
}

double lagrangian(const Policy& policy, const HypothesisClass& cls,
                  const Batch& batch, const AuditOutcome& rho, double C,
                  double a) {
  if (!(C > 0.0)) fail("C must be positive");
  validate_outcome(rho, batch.size());
  return lagrangian(predictions(policy, cls), batch, rho, C, a);
}

Eigen::VectorXd hypothesis_errors(const HypothesisClass& cls,
                                  const Batch& batch) {
  Eigen::VectorXd errs = Eigen::VectorXd::Zero(cls.size());
  for (std::size_t i = 0; i < batch.xs.size(); ++i) {
    const auto row = cls.table().row(batch.xs[i]).transpose();
    if (batch.ys[i])
      errs.array() += 1.0 - row.array();
    else
      errs += row;
  }
  return errs;
}

Eigen::VectorXd hypothesis_lagrangians(const HypothesisClass& cls,
                                       const Batch& batch,
                                       const AuditOutcome& rho, double C,
                                       double a) {
  Eigen::VectorXd values = hypothesis_errors(cls, batch);
  if (rho) {
    const auto& table = cls.table();
    values += C * (table.row(batch.xs[rho->first]) -
                   table.row(batch.xs[rho->second]))
                      .transpose();
    values.array() -= C * a;
  }
  return values;
}

}  // namespace fairlab
