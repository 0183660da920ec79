#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "milpfix/optim.hpp"

using namespace milpfix;
using namespace milpfix::ad;

TEST_CASE("zero gradient without weight decay leaves parameters unchanged") {
  ParameterStore store;
  store.add("w", (Matrix(2, 2) << 1, -2, 3, 4).finished());
  const Matrix before = store.at("w").value;
  store.zero_grad();
  AdamOptions opt;
  opt.weight_decay = 0.0;
  adam_step(store, 0.1, opt);
  CHECK(store.at("w").value == before);
  CHECK(store.step == 1);
}

TEST_CASE("one Adam step from known moments") {
  ParameterStore store;
  store.add("x", Matrix::Constant(1, 1, 1.0));
  auto& e = store.at("x");
  e.first_moment(0) = 0.2;
  e.second_moment(0) = 0.01;
  e.grad(0) = 0.4;
  store.step = 2;
  AdamOptions opt;
  opt.weight_decay = 0.01;
  adam_step(store, 0.05, opt);

  const double m = 0.9 * 0.2 + 0.1 * 0.4;
  const double v = 0.999 * 0.01 + 0.001 * 0.16;
  const double m_hat = m / (1.0 - 0.9 * 0.9 * 0.9);
  const double v_hat = v / (1.0 - 0.999 * 0.999 * 0.999);
  const double expected = 1.0 - 0.05 * 0.01 * 1.0 - 0.05 * m_hat / (std::sqrt(v_hat) + 1e-8);
  CHECK(e.value(0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(e.first_moment(0) == doctest::Approx(m));
  CHECK(e.second_moment(0) == doctest::Approx(v));
  CHECK(store.step == 3);
}

TEST_CASE("global norm clipping scales the gradient") {
  ParameterStore store;
  store.add("a", Matrix::Zero(1, 1));
  store.add("b", Matrix::Zero(1, 1));
  store.at("a").grad(0) = 60.0;
  store.at("b").grad(0) = 80.0;
  AdamOptions opt;
  opt.weight_decay = 0.0;
  opt.clip_norm = 10.0;
  const double norm = adam_step(store, 1e-3, opt);
  CHECK(norm == doctest::Approx(100.0));
  CHECK(store.at("a").first_moment(0) == doctest::Approx(0.1 * 6.0));
  CHECK(store.at("b").first_moment(0) == doctest::Approx(0.1 * 8.0));
  CHECK(store.at("b").second_moment(0) == doctest::Approx(0.001 * 64.0));
}

TEST_CASE("decoupled weight decay alone") {
  ParameterStore store;
  store.add("w", Matrix::Constant(1, 1, 2.0));
  store.zero_grad();
  AdamOptions opt;
  opt.weight_decay = 0.1;
  adam_step(store, 0.5, opt);
  CHECK(store.at("w").value(0) == doctest::Approx(2.0 * (1.0 - 0.05)));
}

TEST_CASE("learning-rate schedule") {
  const LearningRateSchedule s{1e-4, 1e-2, 10, 0.99};
  CHECK(s.value(0, 110) == doctest::Approx(1e-4));
  CHECK(s.value(5, 110) == doctest::Approx(0.5 * (1e-4 + 1e-2)));
  CHECK(s.value(10, 110) == doctest::Approx(1e-2));
  // last step sits on the floor (1 − 0.99) · peak
  CHECK(s.value(109, 110) == doctest::Approx(1e-4));
  // halfway through the decay the cosine envelope is ½
  CHECK(s.value(60, 111) == doctest::Approx(1e-2 * (0.99 * 0.5 + 0.01)));
  double prev = s.value(10, 110);
  for (std::int64_t t = 11; t < 110; ++t) {
    CHECK(s.value(t, 110) <= prev);
    prev = s.value(t, 110);
  }
}

TEST_CASE("checkpoint round trip") {
  ParameterStore store;
  store.add("w", (Matrix(2, 3) << 1, 2, 3, 4, 5, 6.5).finished());
  store.add("b", Matrix::Constant(1, 3, -0.25));
  store.at("w").first_moment.setConstant(0.125);
  store.at("b").second_moment.setConstant(3.0);
  store.step = 42;
  const nlohmann::json meta{{"family", "caching"}, {"step", 42}};
  const auto path = std::filesystem::temp_directory_path() / "milpfix_test_roundtrip.ckpt";
  save_checkpoint(store, meta, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta == meta);
  CHECK(loaded.store.step == 42);
  REQUIRE(loaded.store.size() == 2);
  for (const auto& e : store) {
    const auto& l = loaded.store.at(e.name);
    CHECK(l.value == e.value);
    CHECK(l.first_moment == e.first_moment);
    CHECK(l.second_moment == e.second_moment);
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto path = std::filesystem::temp_directory_path() / "milpfix_test_corrupt.ckpt";
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"), Error);
  std::filesystem::remove(path);
}
