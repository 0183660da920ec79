// SPDX-License-Identifier: Apache-2.0
#include "milpfix/simplex.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace milpfix {

VariableBounds VariableBounds::nonnegative(Index n) {
  return {Vector::Zero(n), Vector::Constant(n, std::numeric_limits<double>::infinity())};
}

VariableBounds VariableBounds::free(Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

namespace {

/// Tableau in canonical form: rows 0..m-1 are constraints, the last row holds
/// reduced costs, the last column holds the right-hand side (negated objective
/// in the cost row).
class Tableau {
 public:
  Tableau(Matrix t, std::vector<Index> basis, double tol, std::int64_t budget)
      : t_(std::move(t)), basis_(std::move(basis)), tol_(tol), budget_(budget) {}

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  Matrix& data() { return t_; }
  std::vector<Index>& basis() { return basis_; }
  std::int64_t pivots() const { return pivots_; }

  void set_costs(const Vector& cost) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(cost.size()) = cost.transpose();
    for (Index i = 0; i < rows(); ++i) {
      const double cb = cost(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(rows()) -= cb * t_.row(i);
    }
  }

  /// Runs Bland's rule over columns [0, allowed). Returns false on unboundedness.
  bool optimize(Index allowed) {
    for (;;) {
      Index enter = -1;
      for (Index j = 0; j < allowed; ++j) {
        if (t_(rows(), j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < rows(); ++i) {
        const double a = t_(i, enter);
        if (a <= tol_) continue;
        const double ratio = t_(i, cols()) / a;
        if (ratio < best - 1e-12 ||
            (std::abs(ratio - best) <= 1e-12 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void pivot(Index r, Index c) {
    if (++pivots_ > budget_) {
      fail(ErrorCode::IterationLimit, "simplex exceeded " + std::to_string(budget_) + " pivots (cycling suspected)");
    }
    t_.row(r) /= t_(r, c);
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  void drop_row(Index r) {
    Matrix next(t_.rows() - 1, t_.cols());
    next.topRows(r) = t_.topRows(r);
    next.bottomRows(t_.rows() - 1 - r) = t_.bottomRows(t_.rows() - 1 - r);
    t_ = std::move(next);
    basis_.erase(basis_.begin() + r);
  }

  void keep_columns(Index n) {
    Matrix next(t_.rows(), n + 1);
    next.leftCols(n) = t_.leftCols(n);
    next.col(n) = t_.col(cols());
    t_ = std::move(next);
  }

 private:
  Matrix t_;
  std::vector<Index> basis_;
  double tol_;
  std::int64_t budget_;
  std::int64_t pivots_ = 0;
};

}  // namespace

SolveReport solve_lp(const Vector& c, const Matrix& A, const Vector& b, const VariableBounds& bounds,
                     const LpOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Index n = c.size();
  if (A.cols() != n || A.rows() != b.size() || bounds.lower.size() != n || bounds.upper.size() != n) {
    fail(ErrorCode::DimensionMismatch, "solve_lp: inconsistent dimensions");
  }
  if (!c.allFinite() || !A.allFinite() || !b.allFinite()) {
    fail(ErrorCode::NonFiniteValue, "solve_lp: non-finite problem data");
  }
  SolveReport report;
  auto finish = [&](SolveReport& r) -> SolveReport& {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };

  // x = offset + map · y with y ≥ 0.
  Index ny = 0;
  for (Index j = 0; j < n; ++j) {
    const bool lo = std::isfinite(bounds.lower(j));
    const bool up = std::isfinite(bounds.upper(j));
    if (lo && up && bounds.upper(j) < bounds.lower(j)) {
      report.status = SolveStatus::Infeasible;
      return finish(report);
    }
    ny += (!lo && !up) ? 2 : 1;
  }
  Matrix map = Matrix::Zero(n, ny);
  Vector offset = Vector::Zero(n);
  std::vector<std::pair<Index, double>> box_rows;
  for (Index j = 0, k = 0; j < n; ++j) {
    const bool lo = std::isfinite(bounds.lower(j));
    const bool up = std::isfinite(bounds.upper(j));
    if (lo) {
      offset(j) = bounds.lower(j);
      map(j, k) = 1.0;
      if (up) box_rows.emplace_back(k, bounds.upper(j) - bounds.lower(j));
      ++k;
    } else if (up) {
      offset(j) = bounds.upper(j);
      map(j, k++) = -1.0;
    } else {
      map(j, k++) = 1.0;
      map(j, k++) = -1.0;
    }
  }

  const Index m = A.rows() + static_cast<Index>(box_rows.size());
  Matrix ay = Matrix::Zero(m, ny);
  Vector by(m);
  ay.topRows(A.rows()) = A * map;
  by.head(A.rows()) = b - A * offset;
  for (std::size_t r = 0; r < box_rows.size(); ++r) {
    ay(A.rows() + static_cast<Index>(r), box_rows[r].first) = 1.0;
    by(A.rows() + static_cast<Index>(r)) = box_rows[r].second;
  }
  const Vector cy = map.transpose() * c;

  Index num_art = 0;
  for (Index i = 0; i < m; ++i) num_art += by(i) < 0.0 ? 1 : 0;
  const Index structural = ny + m;  // y then slacks
  const Index width = structural + num_art;
  Matrix t = Matrix::Zero(m + 1, width + 1);
  std::vector<Index> basis(static_cast<std::size_t>(m));
  for (Index i = 0, a = 0; i < m; ++i) {
    if (by(i) >= 0.0) {
      t.row(i).head(ny) = ay.row(i);
      t(i, ny + i) = 1.0;
      t(i, width) = by(i);
      basis[static_cast<std::size_t>(i)] = ny + i;
    } else {
      t.row(i).head(ny) = -ay.row(i);
      t(i, ny + i) = -1.0;
      t(i, structural + a) = 1.0;
      t(i, width) = -by(i);
      basis[static_cast<std::size_t>(i)] = structural + a;
      ++a;
    }
  }
  const std::int64_t budget = options.max_pivots > 0 ? options.max_pivots : 10 * (m + 1 + width + 1);
  Tableau tab(std::move(t), std::move(basis), options.pivot_tol, budget);

  if (num_art > 0) {
    Vector phase1 = Vector::Zero(width);
    phase1.tail(num_art).setOnes();
    tab.set_costs(phase1);
    tab.optimize(width);
    const double infeasibility = -tab.data()(tab.rows(), tab.cols());
    const double scale = std::max(1.0, by.cwiseAbs().maxCoeff());
    if (infeasibility > 1e-9 * scale) {
      report.status = SolveStatus::Infeasible;
      report.iterations = tab.pivots();
      return finish(report);
    }
    // Drive remaining (zero-valued) artificials out of the basis.
    for (Index i = tab.rows() - 1; i >= 0; --i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < structural) continue;
      Index col = -1;
      for (Index j = 0; j < structural; ++j) {
        if (std::abs(tab.data()(i, j)) > options.pivot_tol) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
      } else {
        tab.drop_row(i);
      }
    }
    tab.keep_columns(structural);
  }

  Vector phase2 = Vector::Zero(structural);
  phase2.head(ny) = cy;
  tab.set_costs(phase2);
  const bool bounded = tab.optimize(structural);
  report.iterations = tab.pivots();
  if (!bounded) {
    report.status = SolveStatus::Unbounded;
    return finish(report);
  }
  Vector y = Vector::Zero(ny);
  for (Index i = 0; i < tab.rows(); ++i) {
    const Index v = tab.basis()[static_cast<std::size_t>(i)];
    if (v < ny) y(v) = tab.data()(i, tab.cols());
  }
  report.status = SolveStatus::Optimal;
  report.assignment = offset + map * y;
  report.objective = c.dot(report.assignment);
  return finish(report);
}

}  // namespace milpfix
