#include "doctest.h"

#include <random>

#include "milpfix/oracle.hpp"
#include "support.hpp"

using namespace milpfix;
using testing_support::dense_instance;

TEST_CASE("knapsack optimum with lexicographic tie-break") {
  Matrix A = Matrix::Constant(1, 3, 2.0);
  Vector c(3);
  c << -3, -2, -2;
  const MilpInstance inst = dense_instance(A, Vector::Constant(1, 4.0), c, 3);
  // Brute force: (1,1,0) and (1,0,1) both reach 5; (1,0,1) is lexicographically smaller.
  const auto bf = testing_support::brute_force(inst);
  REQUIRE(bf.feasible);
  CHECK(bf.best == -5.0);
  const SolveReport r = enumerate_solve(inst);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == -5.0);
  CHECK(r.assignment == bf.argbest);
  CHECK(r.iterations == 8);
  const SolveReport k = knapsack_solve(inst);
  CHECK(k.assignment == bf.argbest);
  OracleOptions pruned;
  pruned.prune = true;
  CHECK(enumerate_solve(inst, pruned).assignment == bf.argbest);
}

TEST_CASE("nonnegative costs give the zero vector") {
  std::mt19937_64 rng(8);
  MilpInstance inst = testing_support::random_binary_instance(rng, 6, 3);
  inst.c = inst.c.cwiseAbs();
  const SolveReport r = enumerate_solve(inst);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.assignment.isZero());
}

TEST_CASE("contradictory rows are infeasible") {
  Matrix A(2, 1);
  A << 1, -1;
  Vector b(2);
  b << 0.2, -0.8;
  const SolveReport r = enumerate_solve(dense_instance(A, b, Vector::Ones(1), 1));
  CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("too many binaries") {
  const MilpInstance inst = dense_instance(Matrix::Zero(0, 23), Vector(0), Vector::Ones(23), 23);
  try {
    enumerate_solve(inst);
    FAIL("expected TooManyBinaries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyBinaries);
  }
}

TEST_CASE("oracle matches independent brute force on random instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 9);
    const MilpInstance inst = testing_support::random_binary_instance(rng, n, 1 + static_cast<Index>(rng() % 5), 0.6,
                                                                      trial % 3 != 0);
    const auto bf = testing_support::brute_force(inst);
    for (bool prune : {false, true}) {
      OracleOptions opts;
      opts.prune = prune;
      const SolveReport r = enumerate_solve(inst, opts);
      if (!bf.feasible) {
        CHECK(r.status == SolveStatus::Infeasible);
        continue;
      }
      REQUIRE(r.status == SolveStatus::Optimal);
      CHECK(r.objective <= bf.best + 1e-12);
      CHECK(check_feasibility(inst, r.assignment));
      CHECK(r.objective == doctest::Approx(objective(inst, r.assignment)).epsilon(1e-9));
    }
  }
}

TEST_CASE("integral knapsack DP agrees with enumeration") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 3 + static_cast<Index>(rng() % 10);
    Matrix A(1, n);
    Vector c(n);
    for (Index j = 0; j < n; ++j) {
      A(0, j) = 1.0 + static_cast<double>(rng() % 10);
      c(j) = -static_cast<double>(rng() % 5);
    }
    const MilpInstance inst = dense_instance(A, Vector::Constant(1, std::floor(0.3 * A.sum())), c, n);
    REQUIRE(is_integral_knapsack(inst));
    const SolveReport e = enumerate_solve(inst);
    const SolveReport k = knapsack_solve(inst);
    CHECK(k.objective == e.objective);
    CHECK(k.assignment == e.assignment);
    CHECK(exact_solve(inst).assignment == e.assignment);
  }
}

TEST_CASE("continuous residual LP") {
  // min -z0 - x  s.t. x ≤ 2 z0, x ≤ 1.5, -x ≤ 0, with x continuous.
  Matrix A(3, 2);
  A << -2, 1,
        0, 1,
        0, -1;
  Vector b(3);
  b << 0, 1.5, 0;
  Vector c(2);
  c << -1, -1;
  const SolveReport r = enumerate_solve(dense_instance(A, b, c, 1));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment(0) == 1.0);
  CHECK(r.assignment(1) == doctest::Approx(1.5));
  CHECK(r.objective == doctest::Approx(-2.5));
}
