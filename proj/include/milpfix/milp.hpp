// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "milpfix/error.hpp"

namespace milpfix {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Default absolute feasibility tolerance. Applied to normalized data, where
/// every row has unit scale, it doubles as a relative tolerance.
inline constexpr double kFeasibilityTol = 1e-6;

/// minimize cᵀz  s.t.  A z ≤ b, with the first `num_binary` variables in
/// {0,1} and the remaining `num_continuous` variables free reals.
struct MilpInstance {
  Vector c;
  SparseMatrix A;
  Vector b;
  Index num_binary = 0;
  Index num_continuous = 0;

  Index num_vars() const { return num_binary + num_continuous; }
  Index num_rows() const { return A.rows(); }

  /// Throws DimensionMismatch when the parts disagree.
  void validate() const;
};

/// An instance whose rows may be tagged as equalities. Generators emit these;
/// `to_standard_form` turns them into a MilpInstance.
struct MilpWithEqualities {
  MilpInstance base;
  std::vector<bool> is_equality;  // one flag per row of base.A
};

enum class SolveStatus : std::uint8_t { Optimal, Infeasible, Unbounded };

std::string_view to_string(SolveStatus status);
SolveStatus solve_status_from_string(std::string_view text);

struct Label {
  SolveStatus status = SolveStatus::Infeasible;
  Vector z;
  double objective = 0.0;
  double solve_seconds = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::Infeasible;
  Vector assignment;
  double objective = 0.0;
  double seconds = 0.0;
  /// Enumerated assignments / DFS nodes for the oracle, pivots for the simplex.
  std::int64_t iterations = 0;

  Label to_label() const { return {status, assignment, objective, seconds}; }
};

/// Ordered timesteps of one temporal problem. Labels are optional per step.
struct InstanceSeries {
  std::string id;
  std::string family;
  std::vector<MilpInstance> steps;
  std::vector<std::optional<Label>> labels;

  Index length() const { return static_cast<Index>(steps.size()); }
  Index num_labeled() const;
};

/// Builds a row-major sparse matrix from triplets, summing duplicates and
/// dropping exact zeros.
SparseMatrix make_sparse(Index rows, Index cols, const std::vector<Triplet>& entries);

MilpInstance to_standard_form(const MilpWithEqualities& problem);

/// Row-wise and objective normalization by the p-norm of [aᵢᵀ; bᵢ] and c.
MilpInstance normalize(const MilpInstance& instance, double p = 2.0);

/// p = 2 normalization rescaled so an instance with D̄ variables lands on the
/// scale of training instances with `reference_size` variables.
MilpInstance normalize_rescaled(const MilpInstance& instance, Index reference_size);

double objective(const MilpInstance& instance, const Eigen::Ref<const Vector>& z);

/// max_i (aᵢᵀz − bᵢ); −∞ for an instance without rows.
double max_violation(const MilpInstance& instance, const Eigen::Ref<const Vector>& z);

bool check_feasibility(const MilpInstance& instance, const Eigen::Ref<const Vector>& z,
                       double tol = kFeasibilityTol);

/// Multiplies row i of A and b by factors[i]; c by objective_factor.
MilpInstance scale_rows(const MilpInstance& instance, const Eigen::Ref<const Vector>& factors,
                        double objective_factor = 1.0);

/// Applies variable permutation `var_perm` (new position k holds old variable
/// var_perm[k]) and constraint permutation `row_perm` likewise. The binary block
/// must map onto itself.
MilpInstance permute(const MilpInstance& instance, const std::vector<Index>& var_perm,
                     const std::vector<Index>& row_perm);

}  // namespace milpfix
