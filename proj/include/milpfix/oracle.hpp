// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "milpfix/milp.hpp"
#include "milpfix/simplex.hpp"

namespace milpfix {

struct OracleOptions {
  Index max_binaries = 22;
  /// Depth-first enumeration that skips subtrees already violating a row
  /// regardless of the free variables. Same optimum and tie-break as the
  /// exhaustive sweep, far fewer nodes on equality-heavy models.
  bool prune = false;
  /// Exact dynamic program for single-row, all-binary instances with integral
  /// nonnegative weights (knapsacks). Used by `exact_solve` only.
  bool knapsack_dp = true;
  double feasibility_tol = kFeasibilityTol;
  /// Objectives within this relative distance count as ties.
  double tie_tol = 1e-9;
  LpOptions lp;
};

/// Global optimum over all 2^{D_b} binary assignments, solving the residual
/// LP over the continuous variables for each binary-feasible assignment. Ties
/// go to the lexicographically smallest binary vector. `iterations` counts the
/// enumerated assignments (exhaustive) or DFS nodes (pruned).
SolveReport enumerate_solve(const MilpInstance& instance, const OracleOptions& options = {});

/// True when `knapsack_solve` applies: one row, no continuous variables,
/// integral nonnegative row coefficients.
bool is_integral_knapsack(const MilpInstance& instance);

/// Pseudo-polynomial exact solve of an integral knapsack with the same
/// lexicographic tie-break as the enumeration.
SolveReport knapsack_solve(const MilpInstance& instance, const OracleOptions& options = {});

/// Dispatches to `knapsack_solve` when applicable (and enabled), otherwise to
/// `enumerate_solve`.
SolveReport exact_solve(const MilpInstance& instance, const OracleOptions& options = {});

}  // namespace milpfix
