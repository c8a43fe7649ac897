#include "fairlab/hypotheses.hpp"

#include <algorithm>
#include <stdexcept>

namespace fairlab {

HypothesisClass make_threshold_class(Index n) {
  if (n < 1) throw std::invalid_argument("threshold class needs n >= 1");
  Eigen::MatrixXd table(n, n + 1);
  for (Index i = 0; i <= n; ++i)
    for (Index j = 0; j < n; ++j) table(j, i) = j >= i ? 1.0 : 0.0;
  return HypothesisClass(std::move(table));
}

HypothesisClass make_table_class(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw std::invalid_argument("table class needs at least one row");
  const Index n = static_cast<Index>(rows.front().size());
  bool has_zero = false;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != n)
      throw std::invalid_argument("table class rows differ in length");
    bool all_zero = true;
    for (int v : row) all_zero = all_zero && v == 0;
    has_zero = has_zero || all_zero;
  }
  const Index m = static_cast<Index>(rows.size()) + (has_zero ? 0 : 1);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(n, m);
  for (std::size_t h = 0; h < rows.size(); ++h)
    for (Index x = 0; x < n; ++x) table(x, Index(h)) = rows[h][x];
  // The HypothesisClass constructor rejects duplicates and non-binary entries.
  return HypothesisClass(std::move(table), !has_zero);
}

namespace {

// Unseparated pairs (g, h) with g < h, as a flat list.
std::vector<std::pair<Index, Index>> all_pairs(Index m) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Index g = 0; g < m; ++g)
    for (Index h = g + 1; h < m; ++h) pairs.emplace_back(g, h);
  return pairs;
}

}  // namespace

SeparatorSet find_separator(const HypothesisClass& cls) {
  const auto& table = cls.table();
  auto pending = all_pairs(cls.size());
  SeparatorSet S;
  std::vector<bool> used(static_cast<std::size_t>(cls.universe_size()), false);
  while (!pending.empty()) {
    Index best = -1;
    std::size_t best_count = 0;
    for (Index x = 0; x < cls.universe_size(); ++x) {
      if (used[x]) continue;
      std::size_t count = 0;
      for (const auto& [g, h] : pending) count += table(x, g) != table(x, h);
      if (count > best_count) {
        best = x;
        best_count = count;
      }
    }
    // Distinct columns always differ somewhere, so progress is guaranteed.
    if (best < 0) throw std::logic_error("hypothesis class has duplicate columns");
    used[best] = true;
    S.instances.push_back(best);
    std::erase_if(pending, [&](const auto& p) {
      return table(best, p.first) != table(best, p.second);
    });
  }
  std::sort(S.instances.begin(), S.instances.end());
  return S;
}

bool verify_separator(const HypothesisClass& cls, const SeparatorSet& S) {
  const auto& table = cls.table();
  for (Index x : S.instances)
    if (x < 0 || x >= cls.universe_size()) return false;
  for (const auto& [g, h] : all_pairs(cls.size())) {
    bool separated = false;
    for (Index x : S.instances) {
      if (table(x, g) != table(x, h)) {
        separated = true;
        break;
      }
    }
    if (!separated) return false;
  }
  return true;
}

std::vector<Index> LiftedContext::instances() const {
  std::vector<Index> xs(static_cast<std::size_t>(length), v);
  if (length > 0) xs.front() = x;
  return xs;
}

std::vector<LiftedContext> lift_separator(const SeparatorSet& S, Index v,
                                          Index batch_length) {
  if (batch_length < 1) throw std::invalid_argument("lifted context length must be positive");
  std::vector<LiftedContext> lifted;
  lifted.reserve(S.instances.size());
  for (Index x : S.instances) lifted.push_back({x, v, batch_length});
  return lifted;
}

Eigen::VectorXi lifted_labels(const HypothesisClass& cls, Index h,
                              const LiftedContext& context) {
  Eigen::VectorXi labels(context.length);
  const auto xs = context.instances();
  for (Index i = 0; i < context.length; ++i) labels[i] = cls.predict(h, xs[i]);
  return labels;
}

}  // namespace fairlab
