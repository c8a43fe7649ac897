#include "fairlab/auditor.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace fairlab {

TieBreak parse_tie_break(std::string_view name) {
  if (name == "first" || name == "first-lexicographic")
    return TieBreak::kFirstLexicographic;
  if (name == "max" || name == "max-violation") return TieBreak::kMaxViolation;
  if (name == "random" || name == "seeded-random") return TieBreak::kSeededRandom;
  throw std::invalid_argument("unknown tie_break '" + std::string(name) + "'");
}

std::string_view to_string(TieBreak tie_break) {
  switch (tie_break) {
    case TieBreak::kFirstLexicographic: return "first-lexicographic";
    case TieBreak::kMaxViolation: return "max-violation";
    case TieBreak::kSeededRandom: return "seeded-random";
  }
  return "unknown";
}

Auditor::Auditor(double tolerance, SimilarityFn similarity, TieBreak tie_break,
                 std::uint64_t seed)
    : tolerance_(tolerance),
      similarity_(std::move(similarity)),
      tie_break_(tie_break),
      seed_(seed) {
  if (!(tolerance_ > 0.0)) throw std::invalid_argument("auditor tolerance must be positive");
}

void Auditor::set_similarity(SimilarityFn similarity) {
  similarity_ = std::move(similarity);
}

AuditOutcome Auditor::audit(const std::vector<Index>& xs,
                            const Eigen::Ref<const Eigen::VectorXd>& preds,
                            Index round) const {
  const Index k = static_cast<Index>(xs.size());
  if (k < 2) throw std::invalid_argument("audit needs a batch of at least two");

  AuditOutcome chosen;
  double best_margin = 0.0;
  std::vector<FlaggedPair> violating;

  // Lexicographic scan over ordered pairs of positions; both orientations
  // are visited, but only the one with the larger prediction can be positive.
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double margin =
          preds[xs[i]] - preds[xs[j]] - similarity_(xs[i], xs[j]) - tolerance_;
      if (!(margin > 0.0)) continue;
      switch (tie_break_) {
        case TieBreak::kFirstLexicographic:
          return FlaggedPair{i, j};
        case TieBreak::kMaxViolation:
          if (!chosen || margin > best_margin) {
            chosen = FlaggedPair{i, j};
            best_margin = margin;
          }
          break;
        case TieBreak::kSeededRandom:
          violating.push_back({i, j});
          break;
      }
    }
  }

  if (tie_break_ == TieBreak::kSeededRandom && !violating.empty()) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_),
                      static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(round),
                      static_cast<std::uint32_t>(std::uint64_t(round) >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, violating.size() - 1);
    return violating[pick(rng)];
  }
  return chosen;
}

AuditOutcome Auditor::audit(const std::vector<Index>& xs, const Policy& policy,
                            const HypothesisClass& cls, Index round) const {
  return audit(xs, predictions(policy, cls), round);
}

SimilarityFn make_mahalanobis(const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() != features.cols())
    throw std::invalid_argument("mahalanobis matrix must be square with the feature dimension");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("mahalanobis matrix must be symmetric");
  // LDLT with pivoting accepts singular PSD matrices such as A = 0, which a
  // plain Cholesky would refuse.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::invalid_argument("mahalanobis matrix must be positive semidefinite");

  const Index n = features.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const Eigen::VectorXd diff = (features.row(i) - features.row(j)).transpose();
      d(i, j) = d(j, i) = std::sqrt(std::max(0.0, diff.dot(A * diff)));
    }
  }
  return SimilarityFn(std::move(d));
}

SimilarityFn make_random_nonmetric(Index n, std::uint64_t seed, double scale) {
  if (!(scale >= 0.0)) throw std::invalid_argument("scale must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = scale * unit(rng);
  return SimilarityFn(std::move(d));
}

}  // namespace fairlab
