// SPDX-License-Identifier: Apache-2.0
#include "milpfix/features.hpp"

namespace milpfix {

TripletMaxima dataset_maxima(std::span<const MilpInstance> instances) {
  if (instances.empty()) fail(ErrorCode::EmptyDataset, "cannot compute triplet maxima of an empty dataset");
  TripletMaxima out;
  for (const auto& inst : instances) {
    Eigen::VectorX<Index> per_var = Eigen::VectorX<Index>::Zero(inst.num_vars());
    for (Index i = 0; i < inst.num_rows(); ++i) {
      out.max_vars_per_con = std::max<Index>(out.max_vars_per_con, inst.A.row(i).nonZeros());
      for (SparseMatrix::InnerIterator it(inst.A, i); it; ++it) ++per_var(it.col());
    }
    if (per_var.size() > 0) out.max_cons_per_var = std::max(out.max_cons_per_var, per_var.maxCoeff());
  }
  return out;
}

NodeTriplets build_triplets(const MilpInstance& instance, const TripletMaxima& maxima) {
  instance.validate();
  const Index nv = instance.num_vars();
  const Index nc = instance.num_rows();
  const Index mc = maxima.max_cons_per_var;
  const Index mv = maxima.max_vars_per_con;
  NodeTriplets out;
  out.maxima = maxima;
  out.var_triplets = Matrix::Zero(nv * mc, 3);
  out.var_mask.setConstant(nv, mc, false);
  out.con_triplets = Matrix::Zero(nc * mv, 3);
  out.con_mask.setConstant(nc, mv, false);

  Eigen::VectorX<Index> fill = Eigen::VectorX<Index>::Zero(nv);
  // Rows are visited in ascending order, so each variable's triplets come out
  // sorted by constraint index.
  for (Index i = 0; i < nc; ++i) {
    Index k = 0;
    for (SparseMatrix::InnerIterator it(instance.A, i); it; ++it, ++k) {
      const Index j = it.col();
      if (k >= mv || fill(j) >= mc) {
        fail(ErrorCode::MaximaExceeded, "node degree exceeds dataset maxima (m_c=" + std::to_string(mc) +
                                            ", m_v=" + std::to_string(mv) + ")");
      }
      const Eigen::RowVector3d triplet(it.value(), instance.b(i), instance.c(j));
      out.con_triplets.row(i * mv + k) = triplet;
      out.con_mask(i, k) = true;
      out.var_triplets.row(j * mc + fill(j)) = triplet;
      out.var_mask(j, fill(j)) = true;
      ++fill(j);
    }
  }
  return out;
}

}  // namespace milpfix
