#include "doctest.h"

#include <cmath>
#include <random>

#include "milpfix/graph.hpp"
#include "milpfix/milp.hpp"
#include "support.hpp"

using namespace milpfix;
using testing_support::dense_instance;

namespace {

MilpWithEqualities with_equalities(const Matrix& A, const Vector& b, std::vector<bool> eq) {
  MilpWithEqualities p;
  p.base = dense_instance(A, b, Vector::Ones(A.cols()), A.cols());
  p.is_equality = std::move(eq);
  return p;
}

}  // namespace

TEST_CASE("to_standard_form splits one equality into two rows") {
  Matrix A(1, 2);
  A << 1, 1;
  const MilpInstance s = to_standard_form(with_equalities(A, Vector::Constant(1, 2.0), {true}));
  REQUIRE(s.num_rows() == 2);
  const Matrix D(s.A);
  CHECK(D(0, 0) == 1.0);
  CHECK(D(0, 1) == 1.0);
  CHECK(D(1, 0) == -1.0);
  CHECK(D(1, 1) == -1.0);
  CHECK(s.b(0) == 2.0);
  CHECK(s.b(1) == -2.0);
}

TEST_CASE("to_standard_form without equalities is the identity") {
  Matrix A(2, 2);
  A << 1, 2, 3, 4;
  const auto p = with_equalities(A, Vector::Ones(2), {false, false});
  const MilpInstance s = to_standard_form(p);
  CHECK(Matrix(s.A) == A);
  CHECK(s.b == p.base.b);
  CHECK(s.c == p.base.c);
}

TEST_CASE("two equalities and one inequality give five rows") {
  Matrix A = Matrix::Ones(3, 2);
  const MilpInstance s = to_standard_form(with_equalities(A, Vector::Ones(3), {true, false, true}));
  CHECK(s.num_rows() == 5);
}

TEST_CASE("equality split is sound") {
  std::mt19937_64 rng(7);
  Matrix A(2, 3);
  A << 1, 1, 0, 0, 1, 1;
  const auto p = with_equalities(A, Vector::Ones(2), {true, true});
  const MilpInstance s = to_standard_form(p);
  for (int mask = 0; mask < 8; ++mask) {
    Vector z(3);
    for (int j = 0; j < 3; ++j) z(j) = (mask >> j) & 1;
    const bool original = ((A * z) - p.base.b).cwiseAbs().maxCoeff() <= 1e-6;
    CHECK(original == check_feasibility(s, z));
  }
}

TEST_CASE("normalize divides rows and objective by their 2-norms") {
  Matrix A(2, 2);
  A << 3, 4, 1, 1;
  Vector b(2);
  b << 0, 1;
  Vector c(2);
  c << 2, 0;
  const MilpInstance n = normalize(dense_instance(A, b, c, 2));
  const Matrix D(n.A);
  CHECK(D(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(D(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(n.b(0) == 0.0);
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  CHECK(D(1, 0) == doctest::Approx(inv_sqrt3).epsilon(1e-15));
  CHECK(n.b(1) == doctest::Approx(inv_sqrt3).epsilon(1e-15));
  CHECK(n.c(0) == 1.0);
  CHECK(n.c(1) == 0.0);
}

TEST_CASE("normalize rejects degenerate rows and objectives") {
  Matrix A = Matrix::Zero(1, 2);
  A(0, 0) = 1.0;
  MilpInstance inst = dense_instance(A, Vector::Zero(1), Vector::Zero(2), 2);
  try {
    normalize(inst);
    FAIL("expected ZeroObjective");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroObjective);
  }
  inst.c = Vector::Ones(2);
  inst.A = SparseMatrix(1, 2);
  try {
    normalize(inst);
    FAIL("expected ZeroNormRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroNormRow);
  }
}

TEST_CASE("normalize_rescaled") {
  Matrix A = Matrix::Zero(1, 8);
  A(0, 0) = 3;
  A(0, 1) = 4;
  const MilpInstance inst = dense_instance(A, Vector::Zero(1), Vector::Ones(8), 8);
  SUBCASE("same size reduces to normalize") {
    const MilpInstance a = normalize_rescaled(inst, 8);
    const MilpInstance b = normalize(inst);
    CHECK((Matrix(a.A) - Matrix(b.A)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((a.c - b.c).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("reference 3, instance 8") {
    const MilpInstance a = normalize_rescaled(inst, 3);
    CHECK(Matrix(a.A)(0, 0) == doctest::Approx(0.6 * std::sqrt(9.0 / 4.0)).epsilon(1e-14));
  }
  SUBCASE("four times the reference doubles a normalized objective") {
    const MilpInstance a = normalize_rescaled(inst, 2);
    const MilpInstance b = normalize(inst);
    CHECK((a.c - 2.0 * b.c).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("normalize is idempotent and scale invariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> k(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const MilpInstance inst = testing_support::random_binary_instance(rng, 6, 4);
    const MilpInstance n1 = normalize(inst);
    const MilpInstance n2 = normalize(n1);
    CHECK((Matrix(n1.A) - Matrix(n2.A)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((n1.b - n2.b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((n1.c - n2.c).cwiseAbs().maxCoeff() < 1e-12);
    Vector f(inst.num_rows());
    for (Index i = 0; i < f.size(); ++i) f(i) = k(rng);
    const MilpInstance ns = normalize(scale_rows(inst, f, k(rng)));
    CHECK((Matrix(n1.A) - Matrix(ns.A)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((n1.c - ns.c).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("feasibility and objective") {
  Matrix A = Matrix::Constant(1, 3, 2.0);
  Vector c(3);
  c << 1, 2, 3;
  const MilpInstance inst = dense_instance(A, Vector::Constant(1, 4.0), c, 3);
  CHECK(check_feasibility(inst, Vector::Zero(3)));
  CHECK_FALSE(check_feasibility(inst, Vector::Ones(3)));
  CHECK(max_violation(inst, Vector::Ones(3)) == doctest::Approx(2.0));
  Vector z(3);
  z << 1, 0, 0;
  CHECK(objective(inst, z) == 1.0);
  Vector z5(5);
  z5 << 0.5, -1.25, 2, 3, -0.75;
  Vector c5(5);
  c5 << 4, 2, -1, 0.5, 8;
  const MilpInstance five = dense_instance(Matrix::Zero(0, 5), Vector(0), c5, 5);
  CHECK(objective(five, z5) == doctest::Approx(2.0 - 2.5 - 2.0 + 1.5 - 6.0));
  CHECK_THROWS_AS(objective(inst, Vector::Zero(2)), Error);
  CHECK_THROWS_AS(check_feasibility(inst, Vector::Zero(4)), Error);
}

TEST_CASE("bipartite graph") {
  Matrix A(1, 2);
  A << 1, -1;
  const BipartiteGraph g = build_bipartite_graph(dense_instance(A, Vector::Ones(1), Vector::Ones(2), 2));
  CHECK(g.num_nodes() == 3);
  CHECK(g.adjacency.nonZeros() == 2 * 2 + 3);
  const Matrix D(g.adjacency);
  CHECK(D(0, 2) == 1.0);
  CHECK(D(2, 1) == -1.0);
  CHECK(D(1, 1) == 1.0);

  const BipartiteGraph z = build_bipartite_graph(dense_instance(Matrix::Zero(2, 3), Vector::Ones(2), Vector::Ones(3), 3));
  CHECK(Matrix(z.adjacency) == Matrix::Identity(5, 5));

  std::mt19937_64 rng(3);
  const MilpInstance r = testing_support::random_binary_instance(rng, 7, 5);
  const BipartiteGraph gr = build_bipartite_graph(r);
  CHECK(gr.adjacency.nonZeros() == 2 * r.A.nonZeros() + 12);
  const Matrix N(normalized_adjacency(gr));
  CHECK((N - N.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix Dense(gr.adjacency);
  const Vector deg = Dense.cwiseAbs().rowwise().sum();
  for (Index i = 0; i < N.rows(); ++i) {
    for (Index j = 0; j < N.cols(); ++j) {
      CHECK(N(i, j) == doctest::Approx(Dense(i, j) / std::sqrt(deg(i) * deg(j))).epsilon(1e-14));
    }
  }
}

TEST_CASE("permute keeps the binary block and remaps rows") {
  std::mt19937_64 rng(5);
  const MilpInstance inst = testing_support::random_binary_instance(rng, 4, 3);
  const MilpInstance p = permute(inst, {2, 0, 3, 1}, {1, 2, 0});
  const Matrix A(inst.A);
  const Matrix P(p.A);
  CHECK(P(0, 0) == A(1, 2));
  CHECK(P(2, 3) == A(0, 1));
  CHECK(p.b(0) == inst.b(1));
  CHECK(p.c(1) == inst.c(0));
}
