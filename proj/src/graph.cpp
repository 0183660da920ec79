// SPDX-License-Identifier: Apache-2.0
#include "milpfix/graph.hpp"

#include <cmath>

namespace milpfix {

BipartiteGraph build_bipartite_graph(const MilpInstance& instance) {
  instance.validate();
  const Index nv = instance.num_vars();
  const Index nc = instance.num_rows();
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(2 * instance.A.nonZeros() + nv + nc));
  for (Index v = 0; v < nv + nc; ++v) entries.emplace_back(v, v, 1.0);
  for (Index i = 0; i < nc; ++i) {
    for (SparseMatrix::InnerIterator it(instance.A, i); it; ++it) {
      entries.emplace_back(nv + i, it.col(), it.value());
      entries.emplace_back(it.col(), nv + i, it.value());
    }
  }
  BipartiteGraph g;
  g.num_vars = nv;
  g.num_cons = nc;
  g.adjacency = make_sparse(nv + nc, nv + nc, entries);
  return g;
}

SparseMatrix normalized_adjacency(const BipartiteGraph& graph) {
  const SparseMatrix& a = graph.adjacency;
  Vector inv_sqrt_deg(a.rows());
  for (Index r = 0; r < a.rows(); ++r) {
    double d = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) d += std::abs(it.value());
    inv_sqrt_deg(r) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  SparseMatrix out = a;
  for (Index r = 0; r < out.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(out, r); it; ++it) {
      it.valueRef() *= inv_sqrt_deg(r) * inv_sqrt_deg(it.col());
    }
  }
  return out;
}

}  // namespace milpfix
