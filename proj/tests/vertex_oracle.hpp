#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace testing_support {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct VertexResult {
  bool feasible = false;
  double best = std::numeric_limits<double>::infinity();
};

// Every vertex of {Gx ≤ h} is the solution of n tight rows; the LP optimum
// over a bounded polytope sits at one of them.
inline VertexResult vertex_enumeration(const Vector& c, const Matrix& G, const Vector& h) {
  VertexResult out;
  const Index n = G.cols();
  const Index m = G.rows();
  std::vector<Index> pick(static_cast<std::size_t>(n));
  std::function<void(Index, Index)> rec = [&](Index start, Index depth) {
    if (depth == n) {
      Matrix S(n, n);
      Vector r(n);
      for (Index k = 0; k < n; ++k) {
        S.row(k) = G.row(pick[k]);
        r(k) = h(pick[k]);
      }
      Eigen::FullPivLU<Matrix> lu(S);
      if (lu.rank() < n) return;
      const Vector x = lu.solve(r);
      if (((G * x) - h).maxCoeff() > 1e-9) return;
      out.feasible = true;
      out.best = std::min(out.best, c.dot(x));
      return;
    }
    for (Index i = start; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}


}  // namespace testing_support
