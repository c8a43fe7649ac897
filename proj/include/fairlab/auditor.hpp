#ifndef FAIRLAB_AUDITOR_HPP
#define FAIRLAB_AUDITOR_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "fairlab/core.hpp"

namespace fairlab {

enum class TieBreak {
  kFirstLexicographic,
  kMaxViolation,
  kSeededRandom,
};

TieBreak parse_tie_break(std::string_view name);
std::string_view to_string(TieBreak tie_break);

/// Simulated fairness auditor with tolerance alpha'. Given the instances of a
/// round and the deployed predictions it reports one ordered pair of batch
/// positions (rho1, rho2) with pi(x_rho1) - pi(x_rho2) - d - alpha' > 0, or
/// nothing. It never reports magnitudes.
///
/// The auditor is complete: it returns nullopt only when no ordered pair in
/// the batch violates. Which violating pair is reported depends on the
/// tie-break rule; kSeededRandom draws from a generator seeded by
/// (seed, round), so audit() stays a const, reproducible call.
class Auditor {
 public:
  Auditor(double tolerance, SimilarityFn similarity,
          TieBreak tie_break = TieBreak::kMaxViolation,
          std::uint64_t seed = 0);

  double tolerance() const { return tolerance_; }
  TieBreak tie_break() const { return tie_break_; }
  const SimilarityFn& similarity() const { return similarity_; }

  /// The similarity may change between rounds.
  void set_similarity(SimilarityFn similarity);

  AuditOutcome audit(const std::vector<Index>& xs,
                     const Eigen::Ref<const Eigen::VectorXd>& preds,
                     Index round = 0) const;

  AuditOutcome audit(const std::vector<Index>& xs, const Policy& policy,
                     const HypothesisClass& cls, Index round = 0) const;

 private:
  double tolerance_;
  SimilarityFn similarity_;
  TieBreak tie_break_;
  std::uint64_t seed_;
};

/// d(x, x') = sqrt((f_x - f_x')^T A (f_x - f_x')). A must be symmetric PSD;
/// rejected otherwise.
SimilarityFn make_mahalanobis(const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& A);

/// Upper triangle i.i.d. uniform on [0, scale], zero diagonal. Usually
/// violates the triangle inequality somewhere.
SimilarityFn make_random_nonmetric(Index n, std::uint64_t seed, double scale);

}  // namespace fairlab

#endif  // FAIRLAB_AUDITOR_HPP
