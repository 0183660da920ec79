// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "milpfix/milp.hpp"

namespace milpfix {

/// Variable nodes first, then constraint nodes. The weighted adjacency is
/// [[I, Aᵀ], [A, I]].
struct BipartiteGraph {
  Index num_vars = 0;
  Index num_cons = 0;
  SparseMatrix adjacency;

  Index num_nodes() const { return num_vars + num_cons; }
};

BipartiteGraph build_bipartite_graph(const MilpInstance& instance);

/// D^{-1/2} A_adj D^{-1/2} with degrees taken over absolute weights. Self-loops
/// keep every degree ≥ 1.
SparseMatrix normalized_adjacency(const BipartiteGraph& graph);

}  // namespace milpfix
