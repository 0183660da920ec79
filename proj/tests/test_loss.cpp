#include "doctest.h"

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "support.hpp"
#include "tanh_sinh.hpp"
#include "milpfix/loss.hpp"

using namespace milpfix;
using testing_support::gradcheck;
using testing_support::tanh_sinh;

namespace {

const std::vector<double> kGrid{1.0, 1.5, 2.0, 5.0, 10.0, 50.0};

/// ∫ Beta(π; a, b)|z − π| dπ · ∫ −log Beta(π; a, b) dπ, both by tanh-sinh.
double regularizer_integral(double a, double b, double z) {
  const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto log_density = [&](double x, double y) { return (a - 1) * std::log(x) + (b - 1) * std::log(y) - log_b; };
  const double distance =
      tanh_sinh([&](double x, double y) { return std::exp(log_density(x, y)) * (z > 0.5 ? y : x); });
  const double kl = tanh_sinh([&](double x, double y) { return -log_density(x, y); });
  return distance * kl;
}

InstanceSeries labeled_series(const std::vector<Vector>& labels) {
  InstanceSeries s;
  for (const auto& z : labels) {
    MilpInstance inst;
    inst.num_binary = z.size();
    inst.c = Vector::Zero(z.size());
    inst.A.resize(0, z.size());
    inst.b.resize(0);
    s.steps.push_back(inst);
    s.labels.push_back(Label{SolveStatus::Optimal, z, 0.0, 0.0});
  }
  return s;
}

}  // namespace

TEST_CASE("quadrature integrates polynomials") {
  const auto table = cc_table<double>(64);
  CHECK(table.integrate([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(table.integrate([](double p) { return p; }) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(table.integrate([](double p) { return p * p * (1 - p); }) == doctest::Approx(1.0 / 12.0).epsilon(1e-10));
  for (Index k = 0; k < table.nodes.size(); ++k) {
    CHECK(table.nodes(k) >= 0.0);
    CHECK(table.nodes(k) <= 1.0);
  }
  // degree-K/2 monomials are exact even for a small table
  const auto small = cc_table<double>(8);
  CHECK(small.integrate([](double p) { return std::pow(p, 5); }) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("quadrature order must be even and at least 4") {
  CHECK_THROWS_AS(cc_table<double>(7), Error);
  CHECK_THROWS_AS(cc_table<double>(2), Error);
  try {
    cc_table<double>(5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OddOrder);
  }
}

TEST_CASE("NLL examples") {
  const auto table = cc_table<double>(64);
  CHECK(beta_bernoulli_nll(2.0, 2.0, 1.0, table) == doctest::Approx(-std::log(0.5)).epsilon(1e-10));
  CHECK(beta_bernoulli_nll(3.0, 1.0, 1.0, table) == doctest::Approx(-std::log(0.75)).epsilon(1e-10));
  CHECK(beta_bernoulli_nll(3.0, 1.0, 0.0, table) == doctest::Approx(-std::log(0.25)).epsilon(1e-10));
  CHECK(closed_form_marginal(1.0, 4.0, 0.0) == doctest::Approx(0.8));
}

TEST_CASE("NLL agrees with the conjugate marginal on smooth densities") {
  const auto table = cc_table<double>(64);
  for (double a : {1.0, 2.0, 3.0, 5.0, 10.0}) {
    for (double b : {1.0, 2.0, 3.0, 5.0, 10.0}) {
      for (double z : {0.0, 1.0}) {
        CAPTURE(a);
        CAPTURE(b);
        CHECK(std::abs(std::exp(-beta_bernoulli_nll(a, b, z, table)) - closed_form_marginal(a, b, z)) < 1e-8);
      }
    }
  }
}

TEST_CASE("NLL decreases in alpha for a positive label") {
  const auto table = cc_table<double>(64);
  for (double b : {1.0, 2.0, 5.0}) {
    double prev = beta_bernoulli_nll(1.0, b, 1.0, table);
    for (double a = 1.25; a <= 20.0; a += 0.25) {
      const double cur = beta_bernoulli_nll(a, b, 1.0, table);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("regularizer examples and identities") {
  CHECK(regularizer(1.0, 1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(regularizer(1.0, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(regularizer(2.0, 2.0, 1.0) == doctest::Approx(0.5 * (2.0 + std::log(1.0 / 6.0))).epsilon(1e-12));
  CHECK(regularizer(2.0, 2.0, 1.0) == doctest::Approx(0.1041).epsilon(1e-3));
  CHECK(regularizer(3.0, 3.0, 0.0) == regularizer(3.0, 3.0, 1.0));
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double a = 1.0 + 19.0 * i / 9.0;
      const double b = 1.0 + 19.0 * j / 9.0;
      CHECK(regularizer(a, b, 0.0) >= 0.0);
      CHECK(regularizer(a, b, 1.0) >= 0.0);
      if (i + j > 0) CHECK(regularizer(a, b, 1.0) > 0.0);
    }
  }
}

TEST_CASE("regularizer closed form matches its integral definition") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (int k = 0; k < 20; ++k) {
    const double a = u(rng);
    const double b = u(rng);
    const double z = static_cast<double>(k % 2);
    CAPTURE(a);
    CAPTURE(b);
    CHECK(std::abs(regularizer(a, b, z) - regularizer_integral(a, b, z)) < 1e-6);
  }
}

TEST_CASE("class rates and weights") {
  std::vector<Vector> labels;
  for (int k = 0; k < 10; ++k) labels.push_back((Vector(2) << 1.0, k < 2 ? 1.0 : 0.0).finished());
  const Vector r = class_rates({labeled_series(labels)});
  CHECK(r(0) == doctest::Approx(0.999));
  CHECK(r(1) == doctest::Approx(0.2));

  CHECK_THROWS_AS(class_rates({}), Error);
  InstanceSeries unlabeled = labeled_series(labels);
  for (auto& l : unlabeled.labels) l.reset();
  try {
    class_rates({unlabeled});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }

  const Vector w = class_weights((Vector(2) << 0.5, 0.2).finished(), (Vector(2) << 1.0, 0.0).finished());
  CHECK(w(0) == doctest::Approx(2.0));
  CHECK(w(1) == doctest::Approx(1.25));
}

TEST_CASE("schedules") {
  const Schedule s{10, 0.1, 1.0, 5.0};
  CHECK(s.value(0, 100) == 0.1);
  CHECK(s.value(5, 100) == doctest::Approx(0.55));
  CHECK(s.value(10, 100) == doctest::Approx(1.0));
  CHECK(s.value(99, 100) == doctest::Approx(5.0));
  CHECK(s.value(500, 100) == doctest::Approx(5.0));
  CHECK(Schedule::constant(0.3).value(0, 10) == 0.3);
  CHECK(Schedule::constant(0.3).value(9, 10) == 0.3);
}

TEST_CASE("unsupervised loss") {
  using testing_support::dense_instance;
  // a = (1), b = 0, c = 3, ẑ = 2: 3·2 + (2 − 0)² = 10
  const MilpInstance one = dense_instance(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Constant(1, 3.0), 1);
  CHECK(unsupervised_loss(one, Vector::Constant(1, 2.0), Vector(), 1.0) == doctest::Approx(10.0));
  // zero point with b ≥ 0 costs nothing
  const MilpInstance knap =
      dense_instance((Matrix(1, 3) << 1, 2, 3).finished(), Vector::Ones(1), Vector::Constant(3, -1.0), 3);
  CHECK(unsupervised_loss(knap, Vector::Zero(3), Vector(), 5.0) == 0.0);
  // penalty is quadratic in the violation
  const double v1 = unsupervised_loss(one, Vector::Constant(1, 1.0), Vector(), 1.0) - 3.0;
  const double v2 = unsupervised_loss(one, Vector::Constant(1, 2.0), Vector(), 1.0) - 6.0;
  CHECK(v2 == doctest::Approx(4.0 * v1));
}

TEST_CASE("soft assignment") {
  ad::Tape tape;
  const ad::Tensor a = tape.constant((Matrix(3, 1) << 2.0, 1e6, 9.0).finished());
  const ad::Tensor b = tape.constant((Matrix(3, 1) << 2.0, 1.0, 1.0).finished());
  const Matrix z = ad::soft_assignment(a, b).value();
  CHECK(z(0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
  CHECK(z(1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-5));
  const Matrix sharp = ad::soft_assignment(a, b, {true, 1e4}).value();
  CHECK(sharp(2) == doctest::Approx(1.0));
  CHECK(sharp(0) == doctest::Approx(0.5));
}

TEST_CASE("supervised terms mask, weight and match the scalar kernels") {
  const auto table = cc_table<double>(64);
  ad::Tape tape;
  const Vector av = (Vector(3) << 3.0, 2.0, 1.5).finished();
  const Vector bv = (Vector(3) << 1.0, 2.0, 4.0).finished();
  const ad::Tensor a = tape.constant(av);
  const ad::Tensor b = tape.constant(bv);
  ad::SupervisedTargets targets{(Vector(3) << 1.0, 0.0, 1.0).finished(), (Vector(3) << 1.0, 1.0, 0.0).finished(),
                                Vector::Ones(3)};
  const auto terms = ad::supervised_terms(a, b, targets, table);
  CHECK(terms.nll.item() == doctest::Approx(beta_bernoulli_nll(3.0, 1.0, 1.0, table) +
                                            beta_bernoulli_nll(2.0, 2.0, 0.0, table)));
  CHECK(terms.reg.item() == doctest::Approx(regularizer(3.0, 1.0, 1.0) + regularizer(2.0, 2.0, 0.0)));

  targets.weight = Vector::Constant(3, 2.0);  // r_j = 0.5
  CHECK(ad::supervised_terms(a, b, targets, table).nll.item() == doctest::Approx(2.0 * terms.nll.item()));

  targets.mask.setZero();
  CHECK(ad::supervised_terms(a, b, targets, table).nll.item() == 0.0);
}

TEST_CASE("total loss combination") {
  ad::Tape tape;
  const ad::SupervisedTerms sup{tape.constant(Matrix::Constant(1, 1, 2.0)), tape.constant(Matrix::Constant(1, 1, 3.0))};
  const ad::UnsupervisedTerms unsup{tape.constant(Matrix::Constant(1, 1, 5.0)),
                                    tape.constant(Matrix::Constant(1, 1, 7.0))};
  CHECK(ad::total_loss(sup, unsup, {0.0, 0.0, 1.0}).item() == doctest::Approx(2.0));
  CHECK(ad::total_loss(sup, unsup, {0.5, 0.1, 2.0}).item() == doctest::Approx(2.0 + 0.3 + 0.5 * (5.0 + 14.0)));
}

TEST_CASE("loss terms match finite differences") {
  const auto table = cc_table<double>(64);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> raw(-2.0, 2.0);
    const Index n = 4;
    ad::ParameterStore store;
    Matrix u(n, 1), v(n, 1), zc(2, 1);
    for (Index k = 0; k < n; ++k) {
      u(k) = raw(rng);
      v(k) = raw(rng);
    }
    zc << raw(rng), raw(rng);
    store.add("u", u);
    store.add("v", v);
    store.add("zc", zc);
    const MilpInstance inst = testing_support::random_binary_instance(rng, n + 2, 3, 0.8, false);
    ad::PenaltySystem sys{std::make_shared<SparseMatrix>(inst.A), inst.b, inst.c};
    ad::SupervisedTargets targets{(Vector(n) << 1, 0, 1, 0).finished(), (Vector(n) << 1, 1, 0, 1).finished(),
                                  (Vector(n) << 1.5, 2.0, 1.0, 3.0).finished()};
    for (bool sharpened : {false, true}) {
      auto fn = [&](ad::Tape& tape) {
        const ad::Tensor a = ad::shift(ad::softplus(tape.parameter(store, "u")), 1.0);
        const ad::Tensor b = ad::shift(ad::softplus(tape.parameter(store, "v")), 1.0);
        const auto sup = ad::supervised_terms(a, b, targets, table);
        const ad::Tensor zb = ad::soft_assignment(a, b, {sharpened, 3.0});
        const ad::Tensor z = ad::concat_rows({zb, tape.parameter(store, "zc")});
        const auto unsup = ad::unsupervised_terms(z, sys);
        return ad::total_loss(sup, unsup, {0.7, 0.3, 2.0});
      };
      const auto r = gradcheck(store, fn);
      CAPTURE(r.worst);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}
