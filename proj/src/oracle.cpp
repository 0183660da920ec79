// SPDX-License-Identifier: Apache-2.0
#include "milpfix/oracle.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace milpfix {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Shared state of both enumeration strategies: the dense binary/continuous
/// split of A, the candidate evaluation and the incumbent.
class Enumerator {
 public:
  Enumerator(const MilpInstance& instance, const OracleOptions& options)
      : inst_(instance), opt_(options), nb_(instance.num_binary), nc_(instance.num_continuous) {
    const Index m = instance.num_rows();
    const Matrix dense = Matrix(instance.A);
    ab_ = dense.leftCols(nb_);
    has_cont_.assign(static_cast<std::size_t>(m), false);
    for (Index i = 0; i < m; ++i) {
      if (nc_ > 0 && (dense.row(i).tail(nc_).array() != 0.0).any()) {
        has_cont_[static_cast<std::size_t>(i)] = true;
        cont_rows_.push_back(i);
      }
    }
    ac_.resize(static_cast<Index>(cont_rows_.size()), nc_);
    for (std::size_t r = 0; r < cont_rows_.size(); ++r) ac_.row(static_cast<Index>(r)) = dense.row(cont_rows_[r]).tail(nc_);
    cb_ = instance.c.head(nb_);
    cc_ = instance.c.tail(nc_);
  }

  /// Returns false when the residual LP is unbounded (the MILP is unbounded).
  bool consider(const Vector& zb, const Vector& activity, double binary_cost) {
    const Index m = inst_.num_rows();
    for (Index i = 0; i < m; ++i) {
      if (!has_cont_[static_cast<std::size_t>(i)] && activity(i) > inst_.b(i) + opt_.feasibility_tol) return true;
    }
    double value = binary_cost;
    Vector zc;
    if (nc_ > 0) {
      Vector rhs(static_cast<Index>(cont_rows_.size()));
      for (std::size_t r = 0; r < cont_rows_.size(); ++r) {
        rhs(static_cast<Index>(r)) = inst_.b(cont_rows_[r]) - activity(cont_rows_[r]);
      }
      const SolveReport lp = solve_lp(cc_, ac_, rhs, VariableBounds::free(nc_), opt_.lp);
      lp_pivots_ += lp.iterations;
      if (lp.status == SolveStatus::Infeasible) return true;
      if (lp.status == SolveStatus::Unbounded) {
        unbounded_ = true;
        return false;
      }
      value += lp.objective;
      zc = lp.assignment;
    }
    if (!has_best_ || value < best_value_ - opt_.tie_tol * std::max(1.0, std::abs(best_value_))) {
      has_best_ = true;
      best_value_ = value;
      best_.resize(nb_ + nc_);
      best_.head(nb_) = zb;
      if (nc_ > 0) best_.tail(nc_) = zc;
    }
    return true;
  }

  SolveReport result(std::int64_t nodes) const {
    SolveReport r;
    r.iterations = nodes;
    if (unbounded_) {
      r.status = SolveStatus::Unbounded;
    } else if (has_best_) {
      r.status = SolveStatus::Optimal;
      r.assignment = best_;
      r.objective = inst_.c.dot(best_);
    } else {
      r.status = SolveStatus::Infeasible;
    }
    return r;
  }

  const MilpInstance& inst_;
  const OracleOptions& opt_;
  Index nb_;
  Index nc_;
  Matrix ab_;  // column-major dense binary block
  Matrix ac_;  // continuous block restricted to rows touching continuous variables
  Vector cb_;
  Vector cc_;
  std::vector<bool> has_cont_;
  std::vector<Index> cont_rows_;
  bool has_best_ = false;
  bool unbounded_ = false;
  double best_value_ = std::numeric_limits<double>::infinity();
  Vector best_;
  std::int64_t lp_pivots_ = 0;
};

SolveReport exhaustive(Enumerator& e) {
  const Index nb = e.nb_;
  const Index m = e.inst_.num_rows();
  Vector zb = Vector::Zero(nb);
  Vector activity = Vector::Zero(m);
  double cost = 0.0;
  const std::uint64_t total = std::uint64_t{1} << nb;
  for (std::uint64_t k = 0;; ++k) {
    if (!e.consider(zb, activity, cost)) return e.result(static_cast<std::int64_t>(k + 1));
    if (k + 1 == total) break;
    const std::uint64_t flips = k ^ (k + 1);
    for (Index p = 0; p < nb; ++p) {
      if (!((flips >> p) & 1u)) continue;
      const Index j = nb - 1 - p;
      const double s = ((k + 1) >> p) & 1u ? 1.0 : -1.0;
      zb(j) = s > 0 ? 1.0 : 0.0;
      activity.noalias() += s * e.ab_.col(j);
      cost += s * e.cb_(j);
    }
    if (((k + 1) & 0xFFFFu) == 0) {
      // Resynchronize the running sums.
      activity.noalias() = e.ab_ * zb;
      cost = e.cb_.dot(zb);
    }
  }
  return e.result(static_cast<std::int64_t>(total));
}

class PrunedSearch {
 public:
  explicit PrunedSearch(Enumerator& e) : e_(e) {
    const Index m = e.inst_.num_rows();
    activity_ = Vector::Zero(m);
    min_rest_ = Vector::Zero(m);
    zb_ = Vector::Zero(e.nb_);
    cols_.resize(static_cast<std::size_t>(e.nb_));
    for (Index j = 0; j < e.nb_; ++j) {
      for (Index i = 0; i < m; ++i) {
        const double a = e.ab_(i, j);
        if (a == 0.0) continue;
        cols_[static_cast<std::size_t>(j)].emplace_back(i, a);
        min_rest_(i) += std::min(a, 0.0);
      }
    }
  }

  SolveReport run() {
    descend(0);
    return e_.result(nodes_);
  }

 private:
  bool violated(Index j) const {
    for (const auto& [i, a] : cols_[static_cast<std::size_t>(j)]) {
      if (e_.has_cont_[static_cast<std::size_t>(i)]) continue;
      if (activity_(i) + min_rest_(i) > e_.inst_.b(i) + e_.opt_.feasibility_tol) return true;
    }
    return false;
  }

  /// Returns false to abort the whole search (unbounded residual LP).
  bool descend(Index j) {
    ++nodes_;
    if (j == e_.nb_) return e_.consider(zb_, activity_, cost_);
    const auto& col = cols_[static_cast<std::size_t>(j)];
    for (const auto& [i, a] : col) min_rest_(i) -= std::min(a, 0.0);
    bool keep_going = true;
    if (!violated(j)) keep_going = descend(j + 1);
    if (keep_going) {
      zb_(j) = 1.0;
      for (const auto& [i, a] : col) activity_(i) += a;
      cost_ += e_.cb_(j);
      if (!violated(j)) keep_going = descend(j + 1);
      cost_ -= e_.cb_(j);
      for (const auto& [i, a] : col) activity_(i) -= a;
      zb_(j) = 0.0;
    }
    for (const auto& [i, a] : col) min_rest_(i) += std::min(a, 0.0);
    return keep_going;
  }

  Enumerator& e_;
  Vector activity_;
  Vector min_rest_;
  Vector zb_;
  double cost_ = 0.0;
  std::vector<std::vector<std::pair<Index, double>>> cols_;
  std::int64_t nodes_ = 0;
};

bool near_integer(double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); }

}  // namespace

SolveReport enumerate_solve(const MilpInstance& instance, const OracleOptions& options) {
  const auto start = Clock::now();
  instance.validate();
  if (instance.num_binary > options.max_binaries || instance.num_binary > 62) {
    fail(ErrorCode::TooManyBinaries, std::to_string(instance.num_binary) + " binaries exceed the enumeration cap of " +
                                         std::to_string(options.max_binaries));
  }
  Enumerator e(instance, options);
  SolveReport r = options.prune ? PrunedSearch(e).run() : exhaustive(e);
  r.seconds = seconds_since(start);
  return r;
}

bool is_integral_knapsack(const MilpInstance& instance) {
  if (instance.num_continuous != 0 || instance.num_rows() != 1) return false;
  for (SparseMatrix::InnerIterator it(instance.A, 0); it; ++it) {
    if (it.value() < 0.0 || !near_integer(it.value())) return false;
  }
  return true;
}

SolveReport knapsack_solve(const MilpInstance& instance, const OracleOptions& options) {
  const auto start = Clock::now();
  instance.validate();
  if (!is_integral_knapsack(instance)) fail(ErrorCode::DimensionMismatch, "instance is not an integral knapsack");
  const Index n = instance.num_binary;
  SolveReport r;
  const double rhs = instance.b(0) + options.feasibility_tol;
  if (rhs < 0.0) {
    r.status = SolveStatus::Infeasible;
    r.seconds = seconds_since(start);
    return r;
  }
  const Index cap = static_cast<Index>(std::floor(rhs));
  std::vector<Index> w(static_cast<std::size_t>(n), 0);
  for (SparseMatrix::InnerIterator it(instance.A, 0); it; ++it) {
    w[static_cast<std::size_t>(it.col())] = static_cast<Index>(std::llround(it.value()));
  }
  // best(w, i): minimum objective over items i..n-1 with capacity w.
  Matrix best = Matrix::Zero(cap + 1, n + 1);
  for (Index i = n - 1; i >= 0; --i) {
    const Index wi = w[static_cast<std::size_t>(i)];
    const double ci = instance.c(i);
    for (Index cw = 0; cw <= cap; ++cw) {
      double v = best(cw, i + 1);
      if (wi <= cw) v = std::min(v, ci + best(cw - wi, i + 1));
      best(cw, i) = v;
    }
  }
  Vector z = Vector::Zero(n);
  Index cw = cap;
  for (Index i = 0; i < n; ++i) {
    const double here = best(cw, i);
    const double skip = best(cw, i + 1);
    if (skip > here + options.tie_tol * std::max(1.0, std::abs(here))) {
      z(i) = 1.0;
      cw -= w[static_cast<std::size_t>(i)];
    }
  }
  r.status = SolveStatus::Optimal;
  r.assignment = std::move(z);
  r.objective = instance.c.dot(r.assignment);
  r.iterations = static_cast<std::int64_t>(n) * (cap + 1);
  r.seconds = seconds_since(start);
  return r;
}

SolveReport exact_solve(const MilpInstance& instance, const OracleOptions& options) {
  if (options.knapsack_dp && is_integral_knapsack(instance)) {
    const double cells = static_cast<double>(instance.num_binary + 1) * (std::max(0.0, instance.b(0)) + 1.0);
    if (cells <= 5e7) return knapsack_solve(instance, options);
  }
  return enumerate_solve(instance, options);
}

}  // namespace milpfix
