// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "milpfix/milp.hpp"

namespace milpfix {

/// Dataset-level padding sizes: m_c is the largest number of constraints any
/// variable appears in, m_v the largest number of variables in a constraint.
struct TripletMaxima {
  Index max_cons_per_var = 0;
  Index max_vars_per_con = 0;
};

/// Padded (a_ij, b_i, c_j) triplets per node. Row `j * m_c + k` of
/// `var_triplets` is the k-th triplet of variable j; rows past the variable's
/// nonzero count are zero and masked out. Constraint blocks likewise.
struct NodeTriplets {
  TripletMaxima maxima;
  Matrix var_triplets;  // (D_z · m_c) × 3
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> var_mask;  // D_z × m_c
  Matrix con_triplets;  // (D_c · m_v) × 3
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> con_mask;  // D_c × m_v

  Index num_vars() const { return var_mask.rows(); }
  Index num_cons() const { return con_mask.rows(); }
};

TripletMaxima dataset_maxima(std::span<const MilpInstance> instances);

/// Triplets in ascending constraint order (variables) and ascending variable
/// order (constraints). Throws MaximaExceeded if a node has more nonzeros
/// than the maxima allow.
NodeTriplets build_triplets(const MilpInstance& instance, const TripletMaxima& maxima);

}  // namespace milpfix
