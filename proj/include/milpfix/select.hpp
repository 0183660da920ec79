// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "milpfix/milp.hpp"
#include "milpfix/oracle.hpp"

namespace milpfix {

struct BetaMoments {
  Vector mean;
  Vector stddev;
};

/// μ = α/(α+β), σ = √(αβ / ((α+β)²(α+β+1))).
BetaMoments beta_moments(const Vector& alpha, const Vector& beta);

struct SelectionResult {
  std::vector<Index> selected;  // ascending by (score, index)
  Vector fixed_values;          // aligned with `selected`
  Vector scores;                // one per binary variable
  double rho = 0.0;
  double gamma = 0.0;
};

/// ⌈ρ·n⌉, robust to ρ·n landing a rounding error above an integer.
Index selection_size(double rho, Index num_binary);

/// s_j = min(μ_j, 1 − μ_j) + γσ_j; the ⌈ρ·n⌉ lowest scores are fixed to 1
/// when μ_j ≥ 0.5 and to 0 otherwise.
SelectionResult score_and_select(const BetaMoments& moments, double gamma, double rho);

/// The instance left after substituting the fixed binaries. Columns keep
/// their relative order; rows left without variables are dropped.
struct ReducedProblem {
  MilpInstance instance;
  std::vector<Index> free_columns;  // original index of each reduced column
  Vector fixed;                     // full-length assignment of the fixed binaries (0 elsewhere)
  double objective_offset = 0.0;
  bool infeasible = false;          // a dropped row is violated by the fixing alone
};

ReducedProblem reduce(const MilpInstance& instance, const SelectionResult& selection,
                      double tol = kFeasibilityTol);

enum class Backend { Oracle, Export };

struct SolveBackend {
  Backend kind = Backend::Oracle;
  OracleOptions oracle;
  std::filesystem::path export_dir;  // Export only
};

/// Fixes, reduces and solves. The oracle backend returns the completed
/// full-length assignment and its objective on the original instance; the
/// export backend writes `<export_dir>/<name>.mps` and returns nothing.
std::optional<SolveReport> reduce_and_solve(const MilpInstance& instance, const SelectionResult& selection,
                                            const SolveBackend& backend, const std::string& name = "reduced");

struct EvalItem {
  std::string series;
  Index t = 0;
  const MilpInstance* instance = nullptr;
  const Label* label = nullptr;
  Vector alpha;
  Vector beta;
};

struct EvalRecord {
  std::string series;
  Index t = 0;
  double rho = 0.0;
  double gamma = 0.0;
  Index num_fixed = 0;
  Index num_free_binaries = 0;
  double accuracy = 1.0;
  bool feasible = false;
  double objective = 0.0;
  double reference_objective = 0.0;
  double gap_abs = 0.0;
  double gap_rel = 0.0;  // percent
  double t_p = 0.0;
  double t_100 = 0.0;
  std::int64_t iterations = 0;
};

struct EvalOptions {
  std::vector<double> rho_grid{0.3, 0.5, 0.7};
  double gamma = 0.0;
  SolveBackend backend;
  /// Measure the full solve for the time ratio; when false t_100 is the
  /// label's recorded solve time.
  bool measure_full_time = true;
};

/// One record per (ρ, item), ordered by ρ then item. Throws MissingLabels
/// when an item has no optimal label.
std::vector<EvalRecord> evaluate(const std::vector<EvalItem>& items, const EvalOptions& options);

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

struct MetricRow {
  double rho = 0.0;
  double gamma = 0.0;
  Index count = 0;
  Stat accuracy;       // percent
  Stat infeasibility;  // percent
  Stat gap_abs;        // over feasible instances
  Stat gap_rel;        // percent, over feasible instances
  Stat time_ratio;
};

std::vector<MetricRow> summarize(const std::vector<EvalRecord>& records);

/// Lowest infeasibility, then highest accuracy, then smallest γ.
double tune_gamma(const std::vector<EvalItem>& items, double rho, const std::vector<double>& gamma_grid,
                  const SolveBackend& backend);

/// Tab-separated table, one row per ρ.
void write_metric_table(const std::vector<MetricRow>& rows, const std::string& method, std::ostream& out);
/// One JSON object per record and line.
void write_records(const std::vector<EvalRecord>& records, std::ostream& out);

}  // namespace milpfix
