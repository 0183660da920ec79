#include "doctest.h"

#include <sstream>

#include "milpfix/datagen.hpp"
#include "milpfix/io.hpp"
#include "milpfix/select.hpp"
#include "support.hpp"

using namespace milpfix;

namespace {

GeneratorSpec small_spec(Family family) {
  GeneratorSpec spec;
  spec.family = family;
  spec.train_series = 2;
  spec.val_series = 1;
  spec.test_series = 1;
  spec.timesteps = 4;
  spec.seed = 5;
  return spec;
}

std::string serialize(const std::vector<InstanceSeries>& series) {
  std::ostringstream out;
  write_series(series, out);
  return out.str();
}

// Optimum with the listed binaries fixed, via the reduction path.
double fixed_optimum(const MilpInstance& inst, std::vector<Index> selected, Vector values) {
  SelectionResult sel;
  sel.selected = std::move(selected);
  sel.fixed_values = std::move(values);
  const ReducedProblem red = reduce(inst, sel);
  REQUIRE_FALSE(red.infeasible);
  const SolveReport r = exact_solve(red.instance);
  REQUIRE(r.status == SolveStatus::Optimal);
  return r.objective + red.objective_offset;
}

}  // namespace

TEST_CASE("tsp row counts follow the subset counts") {
  // N = 4: 4 in-degree + 4 out-degree equalities, C(4,2) + C(4,3) = 6 + 4 subtour rows.
  const MilpWithEqualities p = tsp_instance(Matrix::Ones(4, 4));
  CHECK(p.base.num_vars() == 12);
  CHECK(p.base.num_rows() == 18);
  CHECK(std::count(p.is_equality.begin(), p.is_equality.end(), true) == 8);
  CHECK(to_standard_form(p).num_rows() == 26);
  CHECK(tsp_subtour_rows(4) == 10);
  for (Index n = 3; n <= 8; ++n) {
    Index expected = 0;
    for (Index k = 2; k <= n - 1; ++k) {
      Index binom = 1;
      for (Index i = 0; i < k; ++i) binom = binom * (n - i) / (i + 1);
      expected += binom;
    }
    CHECK(tsp_subtour_rows(n) == expected);
    CHECK(tsp_instance(Matrix::Ones(n, n)).base.num_rows() == 2 * n + expected);
  }
}

TEST_CASE("three-city tour costs the perimeter") {
  Matrix pts(3, 2);
  pts << 0.0, 0.0, 3.0, 0.0, 0.0, 4.0;
  Matrix cost(3, 3);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) cost(i, j) = (pts.row(i) - pts.row(j)).norm();
  }
  const SolveReport r = exact_solve(to_standard_form(tsp_instance(cost)));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(r.assignment.sum() == 3.0);
}

TEST_CASE("tsp tour and its reverse tie; the smaller vector wins") {
  Matrix cost = Matrix::Ones(4, 4);
  const MilpInstance inst = to_standard_form(tsp_instance(cost));
  const auto bf = testing_support::brute_force(inst);
  OracleOptions pruned;
  pruned.prune = true;
  const SolveReport r = enumerate_solve(inst, pruned);
  CHECK(r.objective == doctest::Approx(4.0));
  CHECK(r.assignment == bf.argbest);
}

TEST_CASE("routing with one path forces it") {
  const std::vector<std::vector<std::vector<Index>>> paths{{{0, 1}}};
  const std::vector<Vector> costs{Vector::Constant(1, 2.0)};
  const MilpInstance inst = to_standard_form(routing_instance(paths, costs, Vector::Constant(1, 1.0),
                                                              Vector::Constant(3, 5.0), Vector::Constant(1, 1.0),
                                                              Vector::Constant(1, 2.0), 3));
  CHECK(inst.num_binary == 1 + 3);
  const SolveReport r = exact_solve(inst);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment(0) == 1.0);
  CHECK(r.assignment.tail(3).isZero());
  // Edge 2 lies on no path: its row holds only the installment.
  const Matrix A(inst.A);
  CHECK(A(2 + 2, 0) == 0.0);
}

TEST_CASE("tiny routing case matches brute force") {
  // Triangle 0-1-2, edges {01, 12, 02}; commodity 0→2 via 02 or 01+12.
  const std::vector<std::vector<std::vector<Index>>> paths{{{2}, {0, 1}}, {{0}, {2, 1}}};
  const std::vector<Vector> costs{(Vector(2) << 1.0, 1.5).finished(), (Vector(2) << 1.0, 2.0).finished()};
  const Vector demand = (Vector(2) << 2.0, 1.5).finished();
  const MilpInstance inst = to_standard_form(routing_instance(
      paths, costs, demand, Vector::Constant(3, 1.0), Vector::Constant(1, 0.8), Vector::Constant(1, 2.0), 3));
  const auto bf = testing_support::brute_force(inst);
  const SolveReport r = exact_solve(inst);
  REQUIRE(bf.feasible);
  CHECK(r.objective == doctest::Approx(bf.best).epsilon(1e-12));
  CHECK(r.assignment == bf.argbest);
}

TEST_CASE("single facility serves everyone") {
  Matrix cost(4, 1);
  cost << 1, 2, 3, 4;
  const SolveReport r =
      exact_solve(to_standard_form(facility_instance(cost, Vector::Ones(4), Vector::Constant(1, 7.0))));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.assignment.isOnes());
  CHECK(r.objective == doctest::Approx(17.0));
}

TEST_CASE("free facilities give each client its cheapest site") {
  Matrix cost(3, 2);
  cost << 1.0, 4.0, 3.0, 2.0, 5.0, 0.5;
  const Vector demand = (Vector(3) << 2.0, 1.0, 3.0).finished();
  const SolveReport r = exact_solve(to_standard_form(facility_instance(cost, demand, Vector::Zero(2))));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(2.0 * 1.0 + 1.0 * 2.0 + 3.0 * 0.5));
}

TEST_CASE("revenue maximization") {
  SUBCASE("huge capacity ships everything") {
    Matrix usage = Matrix::Constant(2, 3, 0.5);
    const SolveReport r = exact_solve(
        to_standard_form(revenue_instance(Vector::Constant(3, 1.0), usage, Vector::Constant(2, 100.0))));
    CHECK(r.assignment.isOnes());
    CHECK(r.objective == doctest::Approx(-3.0));
  }
  SUBCASE("three items against brute force") {
    Matrix usage(2, 3);
    usage << 0.6, 0.5, 0.0, 0.2, 0.7, 0.9;
    const Vector revenue = (Vector(3) << 3.0, 2.5, 2.0).finished();
    const MilpInstance inst = to_standard_form(revenue_instance(revenue, usage, Vector::Constant(2, 1.0)));
    const auto bf = testing_support::brute_force(inst);
    const SolveReport r = exact_solve(inst);
    CHECK(r.objective == doctest::Approx(bf.best));
    CHECK(r.assignment == bf.argbest);
  }
}

TEST_CASE("energy grid") {
  SUBCASE("one prosumer and no batteries is forced to one unit") {
    const MilpInstance inst = to_standard_form(energy_instance(Vector::Constant(1, 2.0), Matrix::Ones(1, 1),
                                                               Vector::Constant(1, 5.0), Vector(0), Matrix(1, 0),
                                                               -1.0, 2.0));
    const SolveReport r = exact_solve(inst);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.assignment(0) == doctest::Approx(1.0));
  }
  SUBCASE("a free battery with positive relief is never worse open") {
    Matrix loss(2, 2);
    loss << 1.0, 0.6, 0.4, 1.2;
    Matrix relief(2, 1);
    relief << 0.3, 0.2;
    const MilpInstance inst = to_standard_form(energy_instance((Vector(2) << 3.0, 1.0).finished(), loss,
                                                               Vector::Constant(2, 0.8), Vector::Zero(1), relief,
                                                               -1.0, 2.0));
    const double open = fixed_optimum(inst, {0}, Vector::Ones(1));
    const double closed = fixed_optimum(inst, {0}, Vector::Zero(1));
    CHECK(open <= closed + 1e-12);
    CHECK(exact_solve(inst).objective == doctest::Approx(std::min(open, closed)).epsilon(1e-9));
  }
}

TEST_CASE("caching") {
  SUBCASE("everything fits") {
    const Vector sizes = (Vector(3) << 2, 3, 4).finished();
    const SolveReport r = exact_solve(to_standard_form(caching_instance(Vector::Constant(3, 1.0 / 3), sizes, 9.0)));
    CHECK(r.assignment.isOnes());
  }
  SUBCASE("room for a single item") {
    const Vector sizes = (Vector(4) << 5, 6, 4, 7).finished();
    const Vector pop = (Vector(4) << 0.2, 0.35, 0.15, 0.3).finished();
    const MilpInstance inst = to_standard_form(caching_instance(pop, sizes, 6.0));
    const auto bf = testing_support::brute_force(inst);
    const SolveReport r = exact_solve(inst);
    CHECK(r.assignment == bf.argbest);
    CHECK(r.assignment(1) == 1.0);
  }
  SUBCASE("constant popularity gives constant labels") {
    GeneratorSpec spec = small_spec(Family::Caching);
    spec.caching.items = 12;
    spec.caching.popularity_noise = 0.0;
    spec.caching.rotation_period = 0;
    auto series = generate_split(spec, Split::Train);
    label_dataset(series, {});
    for (const auto& s : series) {
      for (const auto& label : s.labels) CHECK(label->z == s.labels.front()->z);
    }
  }
}

TEST_CASE("every family generates feasible, bounded instances") {
  for (Family family : {Family::Routing, Family::FacilityLocation, Family::Tsp, Family::RevenueMax,
                        Family::EnergyGrid, Family::Caching}) {
    CAPTURE(to_string(family));
    GeneratorSpec spec = small_spec(family);
    const Dataset data = generate_dataset(spec);
    CHECK(data.train.size() == 2);
    CHECK(data.validation.size() == 1);
    CHECK(data.test.size() == 1);
    auto all = data.train;
    all.insert(all.end(), data.test.begin(), data.test.end());
    OracleOptions oracle;
    oracle.prune = true;
    label_dataset(all, {oracle, 1.0, 0, 0});
    for (const auto& s : all) {
      CHECK(s.length() == 4);
      CHECK(s.family == to_string(family));
      for (std::size_t t = 0; t < s.steps.size(); ++t) {
        REQUIRE(s.labels[t]);
        CHECK(s.labels[t]->status == SolveStatus::Optimal);
        CHECK(check_feasibility(s.steps[t], s.labels[t]->z));
        CHECK((s.steps[t].num_binary <= spec.max_binaries || is_integral_knapsack(s.steps[t])));
      }
    }
  }
}

TEST_CASE("facility demand stays nonnegative") {
  GeneratorSpec spec = small_spec(Family::FacilityLocation);
  spec.timesteps = 60;
  spec.facility.initial_demand = 0.5;
  for (const auto& s : generate_split(spec, Split::Train)) {
    for (const auto& inst : s.steps) CHECK(inst.c.minCoeff() >= 0.0);
  }
}

TEST_CASE("generation is deterministic under the seed") {
  for (Family family : {Family::Routing, Family::EnergyGrid, Family::Caching}) {
    GeneratorSpec spec = small_spec(family);
    CHECK(serialize(generate_split(spec, Split::Train)) == serialize(generate_split(spec, Split::Train)));
    GeneratorSpec other = spec;
    other.seed = 6;
    CHECK(serialize(generate_split(spec, Split::Train)) != serialize(generate_split(other, Split::Train)));
  }
}

TEST_CASE("size and feasibility failures") {
  GeneratorSpec tsp = small_spec(Family::Tsp);
  tsp.tsp.cities = 6;
  try {
    generate_series(tsp, Split::Train, 0);
    FAIL("expected SizeExceedsOracle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SizeExceedsOracle);
  }
  tsp.max_binaries = 30;
  CHECK(generate_series(tsp, Split::Train, 0).steps.front().num_binary == 30);

  GeneratorSpec cache = small_spec(Family::Caching);
  cache.caching.items = 40;
  CHECK(generate_series(cache, Split::Train, 0).steps.front().num_binary == 40);

  GeneratorSpec routing = small_spec(Family::Routing);
  routing.routing.capacity_low = routing.routing.capacity_high = 0.0;
  routing.routing.install_capacity_low = routing.routing.install_capacity_high = 0.01;
  try {
    generate_series(routing, Split::Train, 0);
    FAIL("expected GenerationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GenerationFailed);
  }
}

TEST_CASE("label fraction selects a reproducible subset") {
  GeneratorSpec spec = small_spec(Family::Caching);
  spec.train_series = 2;
  spec.timesteps = 5;
  spec.caching.items = 10;
  const auto base = generate_split(spec, Split::Train);
  auto count = [](const std::vector<InstanceSeries>& s) {
    Index n = 0;
    for (const auto& x : s) n += x.num_labeled();
    return n;
  };
  auto none = base;
  label_dataset(none, {OracleOptions{}, 0.0, 1, 1});
  CHECK(count(none) == 0);
  auto all = base;
  label_dataset(all, {OracleOptions{}, 1.0, 1, 1});
  CHECK(count(all) == 10);
  auto half = base;
  label_dataset(half, {OracleOptions{}, 0.5, 1, 1});
  CHECK(count(half) == 5);
  auto again = base;
  label_dataset(again, {OracleOptions{}, 0.5, 1, 3});
  for (std::size_t s = 0; s < half.size(); ++s) {
    for (std::size_t t = 0; t < half[s].labels.size(); ++t) {
      CHECK(half[s].labels[t].has_value() == again[s].labels[t].has_value());
    }
  }
}

TEST_CASE("generator spec round-trips through JSON") {
  GeneratorSpec spec = small_spec(Family::Tsp);
  spec.tsp.cities = 4;
  spec.tsp.walk_high = 0.1;
  const GeneratorSpec back = generator_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  CHECK(generator_spec_from_json(nlohmann::json::object()).family == Family::Caching);
  nlohmann::json bad = to_json(spec);
  bad["tsp"]["citiez"] = 3;
  CHECK_THROWS_AS(generator_spec_from_json(bad), Error);
  bad = to_json(spec);
  bad["family"] = "knapsack";
  CHECK_THROWS_AS(generator_spec_from_json(bad), Error);
}
