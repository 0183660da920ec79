#include "doctest.h"

#include <limits>
#include <random>

#include "milpfix/simplex.hpp"
#include "support.hpp"
#include "vertex_oracle.hpp"

using namespace milpfix;

using testing_support::vertex_enumeration;
using testing_support::VertexResult;

TEST_CASE("one-dimensional LP") {
  Matrix A(1, 1);
  A << 1;
  const SolveReport r = solve_lp(Vector::Constant(1, -1.0), A, Vector::Ones(1), VariableBounds::nonnegative(1));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment(0) == doctest::Approx(1.0));
  CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("infeasible LP") {
  Matrix A(1, 1);
  A << 1;
  const SolveReport r = solve_lp(Vector::Zero(1), A, Vector::Constant(1, -1.0), VariableBounds::nonnegative(1));
  CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded LP") {
  Matrix A(1, 2);
  A << 1, -1;
  const SolveReport r = solve_lp(Vector::Constant(2, -1.0), A, Vector::Ones(1), VariableBounds::nonnegative(2));
  CHECK(r.status == SolveStatus::Unbounded);
}

TEST_CASE("triangle LP optimum lies on the facet") {
  Matrix A(1, 2);
  A << 1, 1;
  const SolveReport r = solve_lp(Vector::Constant(2, -1.0), A, Vector::Ones(1), VariableBounds::nonnegative(2));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(-1.0));
  CHECK(r.assignment.sum() == doctest::Approx(1.0));
}

TEST_CASE("free variables and finite boxes") {
  Matrix A(2, 1);
  A << 1, -1;
  Vector b(2);
  b << 3, 2;
  SolveReport r = solve_lp(Vector::Ones(1), A, b, VariableBounds::free(1));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment(0) == doctest::Approx(-2.0));
  VariableBounds box{Vector::Constant(1, -1.0), Vector::Constant(1, 0.5)};
  r = solve_lp(Vector::Constant(1, -1.0), A, b, box);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment(0) == doctest::Approx(0.5));
}

TEST_CASE("simplex agrees with vertex enumeration on random LPs") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> nvars(1, 4);
  std::uniform_int_distribution<int> nrows(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int infeasible = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = nvars(rng);
    const Index m = nrows(rng);
    Matrix A(m, n);
    Vector b(m);
    Vector c(n);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) A(i, j) = u(rng);
      b(i) = u(rng);
    }
    for (Index j = 0; j < n; ++j) c(j) = u(rng);
    VariableBounds box{Vector::Zero(n), Vector::Constant(n, 3.0)};
    Matrix G(m + 2 * n, n);
    Vector h(m + 2 * n);
    G << A, -Matrix::Identity(n, n), Matrix::Identity(n, n);
    h << b, Vector::Zero(n), Vector::Constant(n, 3.0);
    const VertexResult ref = vertex_enumeration(c, G, h);
    const SolveReport r = solve_lp(c, A, b, box);
    if (!ref.feasible) {
      ++infeasible;
      CHECK(r.status == SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(std::abs(r.objective - ref.best) < 1e-7);
    CHECK(((A * r.assignment) - b).maxCoeff() < 1e-8);
  }
  CHECK(infeasible < 100);
}
