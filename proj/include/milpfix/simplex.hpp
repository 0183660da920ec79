// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "milpfix/milp.hpp"

namespace milpfix {

/// Per-variable box; ±infinity marks a missing side.
struct VariableBounds {
  Vector lower;
  Vector upper;

  static VariableBounds nonnegative(Index n);
  static VariableBounds free(Index n);
};

struct LpOptions {
  /// 0 selects 10 · (tableau rows + tableau columns).
  std::int64_t max_pivots = 0;
  double pivot_tol = 1e-9;
};

/// Dense two-phase primal simplex with Bland's rule for
///   minimize cᵀx  s.t.  A x ≤ b,  lower ≤ x ≤ upper.
/// Throws IterationLimit when the pivot budget runs out.
SolveReport solve_lp(const Vector& c, const Matrix& A, const Vector& b, const VariableBounds& bounds,
                     const LpOptions& options = {});

}  // namespace milpfix
