#ifndef FAIRLAB_SIMPLEX_HPP
#define FAIRLAB_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fairlab {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

/// minimize c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
template <typename Scalar>
struct LinearProgram {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector c;
  Matrix A_ub;
  Vector b_ub;
  Matrix A_eq;
  Vector b_eq;

  Eigen::Index num_variables() const { return c.size(); }
};

template <typename Scalar>
struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar objective = Scalar(0);
  long iterations = 0;
};

namespace detail {

/// Dense simplex tableau with Bland's anti-cycling rule. Row `m` holds the
/// reduced costs; column `cols - 1` holds the right-hand side.
template <typename Scalar>
class Tableau {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tableau(Matrix body, std::vector<Eigen::Index> basis, Scalar eps)
      : t_(std::move(body)), basis_(std::move(basis)), eps_(eps) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index rhs_col() const { return t_.cols() - 1; }
  Matrix& body() { return t_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }

  /// Sets the objective row to costs - c_B^T B^{-1} A for the given costs
  /// over all structural columns.
  void price(const Vector& costs) {
    const Eigen::Index m = rows();
    t_.row(m).setZero();
    t_.row(m).head(costs.size()) = costs.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar cb = basis_[i] < costs.size() ? costs[basis_[i]] : Scalar(0);
      if (cb != Scalar(0)) t_.row(m) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    Vector column = t_.col(c);
    column[r] = Scalar(0);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> pivot_row = t_.row(r);
    t_.noalias() -= column * pivot_row;
    t_(r, c) = Scalar(1);
    for (Eigen::Index i = 0; i < t_.rows(); ++i)
      if (i != r) t_(i, c) = Scalar(0);
    basis_[r] = c;
  }

  /// Runs Bland's rule over columns [0, allowed). Returns kOptimal,
  /// kUnbounded or kIterationLimit.
  LpStatus run(Eigen::Index allowed, long max_iterations, long& iterations) {
    const Eigen::Index m = rows();
    while (iterations < max_iterations) {
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (t_(m, j) < -eps_) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return LpStatus::kOptimal;

      Eigen::Index leaving = -1;
      Scalar best_ratio = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        const Scalar a = t_(i, entering);
        if (a <= eps_) continue;
        const Scalar ratio = t_(i, rhs_col()) / a;
        if (leaving < 0 || ratio < best_ratio - eps_ ||
            (std::abs(ratio - best_ratio) <= eps_ && basis_[i] < basis_[leaving])) {
          best_ratio = ratio;
          leaving = i;
        }
      }
      if (leaving < 0) return LpStatus::kUnbounded;
      pivot(leaving, entering);
      ++iterations;
    }
    return LpStatus::kIterationLimit;
  }

 private:
  Matrix t_;
  std::vector<Eigen::Index> basis_;
  Scalar eps_;
};

}  // namespace detail

/// Two-phase dense simplex method with Bland's rule. Intended for small
/// problems (hundreds of variables and constraints); returns a vertex
/// solution when one exists.
template <typename Scalar>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp,
                            Scalar eps = Scalar(1e-11)) {
  using Matrix = typename LinearProgram<Scalar>::Matrix;
  using Vector = typename LinearProgram<Scalar>::Vector;
  using Eigen::Index;

  const Index n = lp.num_variables();
  const Index m_ub = lp.A_ub.rows();
  const Index m_eq = lp.A_eq.rows();
  if (m_ub > 0 && (lp.A_ub.cols() != n || lp.b_ub.size() != m_ub))
    throw std::invalid_argument("inequality block has the wrong shape");
  if (m_eq > 0 && (lp.A_eq.cols() != n || lp.b_eq.size() != m_eq))
    throw std::invalid_argument("equality block has the wrong shape");

  const Index m = m_ub + m_eq;

  // Rows needing an artificial variable: equalities, and inequalities whose
  // right-hand side is negative (their slack enters with coefficient -1).
  std::vector<Index> artificial_row;
  for (Index i = 0; i < m_ub; ++i)
    if (lp.b_ub[i] < Scalar(0)) artificial_row.push_back(i);
  for (Index i = 0; i < m_eq; ++i) artificial_row.push_back(m_ub + i);
  const Index num_art = static_cast<Index>(artificial_row.size());

  const Index structural = n + m_ub;  // originals + slacks
  const Index cols = structural + num_art + 1;
  Matrix body = Matrix::Zero(m + 1, cols);
  std::vector<Index> basis(static_cast<std::size_t>(m), -1);

  for (Index i = 0; i < m_ub; ++i) {
    const Scalar sign = lp.b_ub[i] < Scalar(0) ? Scalar(-1) : Scalar(1);
    body.row(i).head(n) = sign * lp.A_ub.row(i);
    body(i, n + i) = sign;
    body(i, cols - 1) = sign * lp.b_ub[i];
    if (sign > Scalar(0)) basis[i] = n + i;
  }
  for (Index i = 0; i < m_eq; ++i) {
    const Scalar sign = lp.b_eq[i] < Scalar(0) ? Scalar(-1) : Scalar(1);
    body.row(m_ub + i).head(n) = sign * lp.A_eq.row(i);
    body(m_ub + i, cols - 1) = sign * lp.b_eq[i];
  }
  for (Index a = 0; a < num_art; ++a) {
    body(artificial_row[a], structural + a) = Scalar(1);
    basis[artificial_row[a]] = structural + a;
  }

  detail::Tableau<Scalar> tableau(std::move(body), std::move(basis), eps);
  LpSolution<Scalar> solution;
  const long max_iterations = 200L * (m + cols) + 10000;

  if (num_art > 0) {
    Vector phase1 = Vector::Zero(cols - 1);
    phase1.tail(num_art).setOnes();
    tableau.price(phase1);
    const LpStatus status = tableau.run(cols - 1, max_iterations, solution.iterations);
    if (status == LpStatus::kIterationLimit) {
      solution.status = status;
      return solution;
    }
    if (-tableau.body()(m, cols - 1) > Scalar(1e3) * eps * std::max<Scalar>(1, m)) {
      solution.status = LpStatus::kInfeasible;
      return solution;
    }
    // Drive zero-level artificials out of the basis where a structural
    // column allows it; rows without one are redundant and stay inert.
    for (Index i = 0; i < m; ++i) {
      if (tableau.basis()[i] < structural) continue;
      for (Index j = 0; j < structural; ++j) {
        if (std::abs(tableau.body()(i, j)) > eps) {
          tableau.pivot(i, j);
          break;
        }
      }
    }
  }

  Vector phase2 = Vector::Zero(structural);
  phase2.head(n) = lp.c;
  tableau.price(phase2);
  solution.status = tableau.run(structural, max_iterations, solution.iterations);
  if (solution.status != LpStatus::kOptimal) return solution;

  solution.x = Vector::Zero(n);
  for (Index i = 0; i < m; ++i) {
    const Index b = tableau.basis()[i];
    if (b < n) solution.x[b] = std::max(Scalar(0), tableau.body()(i, cols - 1));
  }
  solution.objective = lp.c.dot(solution.x);
  return solution;
}

}  // namespace fairlab

#endif  // FAIRLAB_SIMPLEX_HPP
