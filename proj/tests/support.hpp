#pragma once

#include <random>
#include <vector>

#include "milpfix/milp.hpp"

namespace testing_support {

using namespace milpfix;

inline MilpInstance dense_instance(const Matrix& A, const Vector& b, const Vector& c, Index num_binary) {
  MilpInstance inst;
  inst.c = c;
  inst.b = b;
  inst.A = A.sparseView();
  inst.A.makeCompressed();
  inst.num_binary = num_binary;
  inst.num_continuous = c.size() - num_binary;
  return inst;
}

/// Random binary instance with roughly `density` nonzeros; the zero vector is
/// feasible when `zero_feasible` holds.
inline MilpInstance random_binary_instance(std::mt19937_64& rng, Index n, Index m, double density = 0.6,
                                           bool zero_feasible = true) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  std::bernoulli_distribution keep(density);
  Matrix A = Matrix::Zero(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (keep(rng)) A(i, j) = coef(rng);
    }
    if (A.row(i).cwiseAbs().sum() == 0.0) A(i, static_cast<Index>(rng() % static_cast<std::uint64_t>(n))) = 1.0;
  }
  Vector b(m);
  for (Index i = 0; i < m; ++i) b(i) = zero_feasible ? pos(rng) : coef(rng);
  Vector c(n);
  for (Index j = 0; j < n; ++j) c(j) = coef(rng);
  return dense_instance(A, b, c, n);
}

/// Brute force over all binary vectors; no continuous variables.
struct BruteForce {
  bool feasible = false;
  double best = 0.0;
  Vector argbest;
};

inline BruteForce brute_force(const MilpInstance& inst, double tol = 1e-6) {
  BruteForce out;
  const Index n = inst.num_binary;
  const Matrix A(inst.A);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    Vector z(n);
    for (Index j = 0; j < n; ++j) z(j) = ((mask >> (n - 1 - j)) & 1U) ? 1.0 : 0.0;
    if (((A * z) - inst.b).maxCoeff() > tol && A.rows() > 0) continue;
    const double obj = inst.c.dot(z);
    if (!out.feasible || obj < out.best - 1e-12) {
      out.feasible = true;
      out.best = obj;
      out.argbest = z;
    }
  }
  return out;
}

}  // namespace testing_support
