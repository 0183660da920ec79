// SPDX-License-Identifier: Apache-2.0
#include "milpfix/milp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace milpfix {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::ZeroObjective: return "ZeroObjective";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::TooManyBinaries: return "TooManyBinaries";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MaximaExceeded: return "MaximaExceeded";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::OddOrder: return "OddOrder";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::SizeExceedsOracle: return "SizeExceedsOracle";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
  }
  return "infeasible";
}

SolveStatus solve_status_from_string(std::string_view text) {
  if (text == "optimal") return SolveStatus::Optimal;
  if (text == "infeasible") return SolveStatus::Infeasible;
  if (text == "unbounded") return SolveStatus::Unbounded;
  fail(ErrorCode::ParseError, "unknown solve status '" + std::string(text) + "'");
}

void MilpInstance::validate() const {
  std::ostringstream msg;
  if (num_binary < 0 || num_continuous < 0) {
    msg << "negative variable counts";
  } else if (c.size() != num_vars()) {
    msg << "c has " << c.size() << " entries, expected " << num_vars();
  } else if (A.cols() != num_vars()) {
    msg << "A has " << A.cols() << " columns, expected " << num_vars();
  } else if (b.size() != A.rows()) {
    msg << "b has " << b.size() << " entries, A has " << A.rows() << " rows";
  } else {
    return;
  }
  fail(ErrorCode::DimensionMismatch, msg.str());
}

Index InstanceSeries::num_labeled() const {
  Index n = 0;
  for (const auto& l : labels) n += l.has_value() ? 1 : 0;
  return n;
}

SparseMatrix make_sparse(Index rows, Index cols, const std::vector<Triplet>& entries) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

MilpInstance to_standard_form(const MilpWithEqualities& problem) {
  const MilpInstance& in = problem.base;
  in.validate();
  if (problem.is_equality.size() != static_cast<std::size_t>(in.num_rows())) {
    fail(ErrorCode::DimensionMismatch, "equality flags do not match the row count");
  }
  Index out_rows = in.num_rows();
  for (bool eq : problem.is_equality) out_rows += eq ? 1 : 0;

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(2 * in.A.nonZeros()));
  Vector b(out_rows);
  Index r = 0;
  for (Index i = 0; i < in.num_rows(); ++i) {
    for (SparseMatrix::InnerIterator it(in.A, i); it; ++it) entries.emplace_back(r, it.col(), it.value());
    b(r++) = in.b(i);
    if (problem.is_equality[static_cast<std::size_t>(i)]) {
      for (SparseMatrix::InnerIterator it(in.A, i); it; ++it) entries.emplace_back(r, it.col(), -it.value());
      b(r++) = -in.b(i);
    }
  }
  MilpInstance out;
  out.c = in.c;
  out.A = make_sparse(out_rows, in.num_vars(), entries);
  out.b = std::move(b);
  out.num_binary = in.num_binary;
  out.num_continuous = in.num_continuous;
  return out;
}

namespace {

double p_norm(const Eigen::Ref<const Vector>& v, double p) {
  if (p == 2.0) return v.norm();
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

MilpInstance scaled_normalization(const MilpInstance& in, double p, double row_factor, double obj_factor) {
  in.validate();
  MilpInstance out = in;
  const double cn = p_norm(in.c, p);
  if (!(cn > 0.0)) fail(ErrorCode::ZeroObjective, "objective vector has zero norm");
  out.c = in.c * (obj_factor / cn);
  for (Index i = 0; i < in.num_rows(); ++i) {
    Vector row(in.A.row(i).nonZeros() + 1);
    Index k = 0;
    for (SparseMatrix::InnerIterator it(in.A, i); it; ++it) row(k++) = it.value();
    row(k) = in.b(i);
    const double rn = p_norm(row, p);
    if (!(rn > 0.0)) fail(ErrorCode::ZeroNormRow, "row " + std::to_string(i) + " has zero norm");
    const double f = row_factor / rn;
    for (SparseMatrix::InnerIterator it(out.A, i); it; ++it) it.valueRef() = it.value() * f;
    out.b(i) = in.b(i) * f;
  }
  return out;
}

}  // namespace

MilpInstance normalize(const MilpInstance& instance, double p) {
  return scaled_normalization(instance, p, 1.0, 1.0);
}

MilpInstance normalize_rescaled(const MilpInstance& instance, Index reference_size) {
  const Index size = instance.num_vars();
  if (reference_size <= 0 || size <= 0) {
    fail(ErrorCode::DimensionMismatch, "rescaled normalization needs positive sizes");
  }
  const double ref = static_cast<double>(reference_size);
  const double cur = static_cast<double>(size);
  return scaled_normalization(instance, 2.0, std::sqrt((cur + 1.0) / (ref + 1.0)), std::sqrt(cur / ref));
}

double objective(const MilpInstance& instance, const Eigen::Ref<const Vector>& z) {
  if (z.size() != instance.num_vars()) {
    fail(ErrorCode::DimensionMismatch, "assignment has " + std::to_string(z.size()) + " entries, expected " +
                                           std::to_string(instance.num_vars()));
  }
  return instance.c.dot(z);
}

double max_violation(const MilpInstance& instance, const Eigen::Ref<const Vector>& z) {
  if (z.size() != instance.num_vars()) {
    fail(ErrorCode::DimensionMismatch, "assignment has " + std::to_string(z.size()) + " entries, expected " +
                                           std::to_string(instance.num_vars()));
  }
  if (instance.num_rows() == 0) return -std::numeric_limits<double>::infinity();
  return (instance.A * z - instance.b).maxCoeff();
}

bool check_feasibility(const MilpInstance& instance, const Eigen::Ref<const Vector>& z, double tol) {
  return max_violation(instance, z) <= tol;
}

MilpInstance scale_rows(const MilpInstance& instance, const Eigen::Ref<const Vector>& factors,
                        double objective_factor) {
  if (factors.size() != instance.num_rows()) fail(ErrorCode::DimensionMismatch, "one factor per row expected");
  MilpInstance out = instance;
  out.A = factors.asDiagonal() * instance.A;
  out.b = instance.b.cwiseProduct(factors);
  out.c = instance.c * objective_factor;
  return out;
}

MilpInstance permute(const MilpInstance& instance, const std::vector<Index>& var_perm,
                     const std::vector<Index>& row_perm) {
  const Index n = instance.num_vars();
  const Index m = instance.num_rows();
  if (static_cast<Index>(var_perm.size()) != n || static_cast<Index>(row_perm.size()) != m) {
    fail(ErrorCode::DimensionMismatch, "permutation sizes do not match the instance");
  }
  std::vector<Index> new_col(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const Index old = var_perm[static_cast<std::size_t>(k)];
    if ((k < instance.num_binary) != (old < instance.num_binary)) {
      fail(ErrorCode::DimensionMismatch, "variable permutation mixes binary and continuous blocks");
    }
    new_col[static_cast<std::size_t>(old)] = k;
  }
  std::vector<Triplet> entries;
  MilpInstance out;
  out.c.resize(n);
  out.b.resize(m);
  for (Index k = 0; k < n; ++k) out.c(k) = instance.c(var_perm[static_cast<std::size_t>(k)]);
  for (Index r = 0; r < m; ++r) {
    const Index old = row_perm[static_cast<std::size_t>(r)];
    out.b(r) = instance.b(old);
    for (SparseMatrix::InnerIterator it(instance.A, old); it; ++it) {
      entries.emplace_back(r, new_col[static_cast<std::size_t>(it.col())], it.value());
    }
  }
  out.A = make_sparse(m, n, entries);
  out.num_binary = instance.num_binary;
  out.num_continuous = instance.num_continuous;
  return out;
}

}  // namespace milpfix
