#ifndef FAIRLAB_HYPOTHESES_HPP
#define FAIRLAB_HYPOTHESES_HPP

#include <vector>

#include "fairlab/core.hpp"

namespace fairlab {

/// Instances that jointly distinguish every pair of distinct hypotheses.
struct SeparatorSet {
  std::vector<Index> instances;
  Index size() const { return static_cast<Index>(instances.size()); }
};

/// Thresholds over a universe already sorted by a 1-D feature:
/// h_i(x_j) = 1 iff j >= i for i = 0..n. The last one (i = n) is the
/// constant-zero hypothesis, so the class has n + 1 members.
HypothesisClass make_threshold_class(Index n);

/// Builds a class from rows of predictions (one row per hypothesis). The
/// constant-zero hypothesis is appended when absent, which is reported by
/// HypothesisClass::appended_zero(). Duplicate rows are rejected.
HypothesisClass make_table_class(const std::vector<std::vector<int>>& rows);

/// Greedy set cover over hypothesis pairs: repeatedly adds the instance that
/// separates the most still-unseparated pairs, lowest index on ties.
SeparatorSet find_separator(const HypothesisClass& cls);

bool verify_separator(const HypothesisClass& cls, const SeparatorSet& S);

/// A lifted separator context: the batch (x, v, ..., v) of length k'.
struct LiftedContext {
  Index x = 0;
  Index v = 0;
  Index length = 0;

  std::vector<Index> instances() const;
};

std::vector<LiftedContext> lift_separator(const SeparatorSet& S, Index v,
                                          Index batch_length);

/// Labels hypothesis h assigns to a lifted context, i.e. psi_h(xi).
Eigen::VectorXi lifted_labels(const HypothesisClass& cls, Index h,
                              const LiftedContext& context);

}  // namespace fairlab

#endif  // FAIRLAB_HYPOTHESES_HPP
