// SPDX-License-Identifier: Apache-2.0
#include "milpfix/select.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "milpfix/io.hpp"

namespace milpfix {

namespace {

constexpr double kGapEpsilon = 1e-9;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

}  // namespace

BetaMoments beta_moments(const Vector& alpha, const Vector& beta) {
  if (alpha.size() != beta.size()) fail(ErrorCode::ShapeMismatch, "beta_moments: alpha and beta lengths differ");
  const Eigen::ArrayXd a = alpha.array();
  const Eigen::ArrayXd b = beta.array();
  const Eigen::ArrayXd s = a + b;
  BetaMoments m;
  m.mean = (a / s).matrix();
  m.stddev = (a * b / (s.square() * (s + 1.0))).sqrt().matrix();
  return m;
}

Index selection_size(double rho, Index num_binary) {
  if (rho <= 0.0) return 0;
  const double raw = rho * static_cast<double>(num_binary);
  const auto k = static_cast<Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<Index>(k, 0, num_binary);
}

SelectionResult score_and_select(const BetaMoments& moments, double gamma, double rho) {
  if (gamma < 0.0) fail(ErrorCode::ConfigError, "gamma must be nonnegative");
  if (rho < 0.0 || rho > 1.0) fail(ErrorCode::ConfigError, "rho must lie in [0, 1]");
  const Index n = moments.mean.size();
  SelectionResult out;
  out.rho = rho;
  out.gamma = gamma;
  out.scores = moments.mean.cwiseMin(Vector::Ones(n) - moments.mean) + gamma * moments.stddev;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return out.scores(a) < out.scores(b); });
  const Index k = selection_size(rho, n);
  out.selected.assign(order.begin(), order.begin() + k);
  out.fixed_values.resize(k);
  for (Index i = 0; i < k; ++i) out.fixed_values(i) = moments.mean(out.selected[static_cast<std::size_t>(i)]) >= 0.5 ? 1.0 : 0.0;
  return out;
}

ReducedProblem reduce(const MilpInstance& instance, const SelectionResult& selection, double tol) {
  instance.validate();
  const Index n = instance.num_vars();
  std::vector<bool> is_fixed(static_cast<std::size_t>(n), false);
  ReducedProblem out;
  out.fixed = Vector::Zero(n);
  for (std::size_t k = 0; k < selection.selected.size(); ++k) {
    const Index j = selection.selected[k];
    if (j < 0 || j >= instance.num_binary) fail(ErrorCode::DimensionMismatch, "selection refers to a non-binary column");
    is_fixed[static_cast<std::size_t>(j)] = true;
    out.fixed(j) = selection.fixed_values(static_cast<Index>(k));
  }
  std::vector<Index> column_map(static_cast<std::size_t>(n), -1);
  Index free_binary = 0;
  for (Index j = 0; j < n; ++j) {
    if (is_fixed[static_cast<std::size_t>(j)]) continue;
    column_map[static_cast<std::size_t>(j)] = static_cast<Index>(out.free_columns.size());
    out.free_columns.push_back(j);
    if (j < instance.num_binary) ++free_binary;
  }
  out.objective_offset = instance.c.dot(out.fixed);

  std::vector<Triplet> entries;
  std::vector<double> rhs;
  for (Index i = 0; i < instance.num_rows(); ++i) {
    double fixed_activity = 0.0;
    bool has_free = false;
    for (SparseMatrix::InnerIterator it(instance.A, i); it; ++it) {
      const Index col = column_map[static_cast<std::size_t>(it.col())];
      if (col < 0) {
        fixed_activity += it.value() * out.fixed(it.col());
      } else {
        has_free = true;
      }
    }
    const double residual = instance.b(i) - fixed_activity;
    if (!has_free) {
      if (residual < -tol) out.infeasible = true;
      continue;
    }
    const Index row = static_cast<Index>(rhs.size());
    for (SparseMatrix::InnerIterator it(instance.A, i); it; ++it) {
      const Index col = column_map[static_cast<std::size_t>(it.col())];
      if (col >= 0) entries.emplace_back(row, col, it.value());
    }
    rhs.push_back(residual);
  }
  MilpInstance& r = out.instance;
  r.num_binary = free_binary;
  r.num_continuous = instance.num_continuous;
  r.c.resize(static_cast<Index>(out.free_columns.size()));
  for (std::size_t k = 0; k < out.free_columns.size(); ++k) r.c(static_cast<Index>(k)) = instance.c(out.free_columns[k]);
  r.b = Eigen::Map<const Vector>(rhs.data(), static_cast<Index>(rhs.size()));
  r.A = make_sparse(static_cast<Index>(rhs.size()), r.num_vars(), entries);
  return out;
}

std::optional<SolveReport> reduce_and_solve(const MilpInstance& instance, const SelectionResult& selection,
                                            const SolveBackend& backend, const std::string& name) {
  const auto start = std::chrono::steady_clock::now();
  const ReducedProblem reduced = reduce(instance, selection, backend.oracle.feasibility_tol);
  if (backend.kind == Backend::Export) {
    export_mps(reduced.instance, backend.export_dir / (name + ".mps"));
    return std::nullopt;
  }
  SolveReport report;
  if (!reduced.infeasible) {
    const SolveReport inner = exact_solve(reduced.instance, backend.oracle);
    report.status = inner.status;
    report.iterations = inner.iterations;
    if (inner.status == SolveStatus::Optimal) {
      report.assignment = reduced.fixed;
      for (std::size_t k = 0; k < reduced.free_columns.size(); ++k) {
        report.assignment(reduced.free_columns[k]) = inner.assignment(static_cast<Index>(k));
      }
      report.objective = objective(instance, report.assignment);
    }
  }
  report.seconds = seconds_since(start);
  return report;
}

std::vector<EvalRecord> evaluate(const std::vector<EvalItem>& items, const EvalOptions& options) {
  std::vector<double> full_time(items.size(), 0.0);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const EvalItem& item = items[k];
    if (item.label == nullptr || item.label->status != SolveStatus::Optimal) {
      fail(ErrorCode::MissingLabels, "no reference solution for " + item.series + " t=" + std::to_string(item.t));
    }
    if (options.measure_full_time && options.backend.kind == Backend::Oracle) {
      const auto start = std::chrono::steady_clock::now();
      (void)exact_solve(*item.instance, options.backend.oracle);
      full_time[k] = seconds_since(start);
    } else {
      full_time[k] = item.label->solve_seconds;
    }
  }
  std::vector<EvalRecord> out;
  for (double rho : options.rho_grid) {
    for (std::size_t k = 0; k < items.size(); ++k) {
      const EvalItem& item = items[k];
      const SelectionResult sel = score_and_select(beta_moments(item.alpha, item.beta), options.gamma, rho);
      EvalRecord rec;
      rec.series = item.series;
      rec.t = item.t;
      rec.rho = rho;
      rec.gamma = options.gamma;
      rec.num_fixed = static_cast<Index>(sel.selected.size());
      rec.num_free_binaries = item.instance->num_binary - rec.num_fixed;
      Index correct = 0;
      for (std::size_t s = 0; s < sel.selected.size(); ++s) {
        correct += sel.fixed_values(static_cast<Index>(s)) == item.label->z(sel.selected[s]) ? 1 : 0;
      }
      rec.accuracy = rec.num_fixed == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(rec.num_fixed);
      rec.reference_objective = item.label->objective;
      rec.t_100 = full_time[k];
      const auto report = reduce_and_solve(*item.instance, sel, options.backend,
                                           item.series + "_t" + std::to_string(item.t) + "_rho" + std::to_string(rho));
      if (report) {
        rec.feasible = report->status == SolveStatus::Optimal;
        rec.t_p = report->seconds;
        rec.iterations = report->iterations;
        if (rec.feasible) {
          rec.objective = report->objective;
          rec.gap_abs = rec.objective - rec.reference_objective;
          rec.gap_rel = 100.0 * rec.gap_abs / std::max(std::abs(rec.reference_objective), kGapEpsilon);
        }
      }
      out.push_back(rec);
    }
  }
  return out;
}

std::vector<MetricRow> summarize(const std::vector<EvalRecord>& records) {
  std::map<double, std::vector<const EvalRecord*>> by_rho;
  for (const auto& r : records) by_rho[r.rho].push_back(&r);
  std::vector<MetricRow> rows;
  for (const auto& [rho, group] : by_rho) {
    MetricRow row;
    row.rho = rho;
    row.gamma = group.front()->gamma;
    row.count = static_cast<Index>(group.size());
    std::vector<double> acc;
    std::vector<double> inf;
    std::vector<double> gap_abs;
    std::vector<double> gap_rel;
    std::vector<double> ratio;
    for (const EvalRecord* r : group) {
      acc.push_back(100.0 * r->accuracy);
      inf.push_back(r->feasible ? 0.0 : 100.0);
      if (r->feasible) {
        gap_abs.push_back(r->gap_abs);
        gap_rel.push_back(r->gap_rel);
      }
      if (r->t_100 > 0.0) ratio.push_back(r->t_p / r->t_100);
    }
    row.accuracy = stat_of(acc);
    row.infeasibility = stat_of(inf);
    row.gap_abs = stat_of(gap_abs);
    row.gap_rel = stat_of(gap_rel);
    row.time_ratio = stat_of(ratio);
    rows.push_back(row);
  }
  return rows;
}

double tune_gamma(const std::vector<EvalItem>& items, double rho, const std::vector<double>& gamma_grid,
                  const SolveBackend& backend) {
  if (gamma_grid.empty()) fail(ErrorCode::ConfigError, "empty gamma grid");
  std::vector<double> grid = gamma_grid;
  std::sort(grid.begin(), grid.end());
  double best_gamma = grid.front();
  double best_inf = 0.0;
  double best_acc = 0.0;
  bool first = true;
  for (double gamma : grid) {
    EvalOptions opts;
    opts.rho_grid = {rho};
    opts.gamma = gamma;
    opts.backend = backend;
    opts.measure_full_time = false;
    const MetricRow row = summarize(evaluate(items, opts)).front();
    const double inf = row.infeasibility.mean;
    const double acc = row.accuracy.mean;
    if (first || inf < best_inf - 1e-12 || (std::abs(inf - best_inf) <= 1e-12 && acc > best_acc + 1e-12)) {
      best_gamma = gamma;
      best_inf = inf;
      best_acc = acc;
      first = false;
    }
  }
  return best_gamma;
}

void write_metric_table(const std::vector<MetricRow>& rows, const std::string& method, std::ostream& out) {
  out << "method\trho\tgamma\tcount\taccuracy_mean\taccuracy_std\tinfeasibility_mean\tinfeasibility_std"
         "\tgap_abs_mean\tgap_abs_std\tgap_rel_mean\tgap_rel_std\ttime_ratio_mean\ttime_ratio_std\n";
  for (const auto& r : rows) {
    out << method << '\t' << r.rho << '\t' << r.gamma << '\t' << r.count << '\t' << r.accuracy.mean << '\t'
        << r.accuracy.std << '\t' << r.infeasibility.mean << '\t' << r.infeasibility.std << '\t' << r.gap_abs.mean
        << '\t' << r.gap_abs.std << '\t' << r.gap_rel.mean << '\t' << r.gap_rel.std << '\t' << r.time_ratio.mean
        << '\t' << r.time_ratio.std << '\n';
  }
}

void write_records(const std::vector<EvalRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json j = {{"series", r.series},
                        {"t", r.t},
                        {"rho", r.rho},
                        {"gamma", r.gamma},
                        {"num_fixed", r.num_fixed},
                        {"num_free_binaries", r.num_free_binaries},
                        {"accuracy", r.accuracy},
                        {"feasible", r.feasible},
                        {"objective", r.objective},
                        {"reference_objective", r.reference_objective},
                        {"gap_abs", r.gap_abs},
                        {"gap_rel_percent", r.gap_rel},
                        {"t_p", r.t_p},
                        {"t_100", r.t_100},
                        {"iterations", r.iterations}};
    out << j.dump() << '\n';
  }
}

}  // namespace milpfix
