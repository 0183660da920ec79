#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "milpfix/harness.hpp"
#include "milpfix/io.hpp"

using namespace milpfix;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json toy_json(std::int64_t steps) {
  return json{
      {"seed", 5},
      {"generator",
       {{"family", "caching"},
        {"train_series", 6},
        {"val_series", 2},
        {"test_series", 2},
        {"timesteps", 5},
        {"caching", {{"items", 10}}}}},
      {"model", {{"feature_dim", 8}, {"gcn_widths", {8, 8}}, {"lstm_width", 8}}},
      {"training",
       {{"steps", steps},
        {"batch_size", 3},
        {"validate_every", 5},
        {"threads", 1},
        {"loss", {{"lambda", 0.1}, {"lambda_reg", 0.1}, {"lambda_c", 1.0}}},
        {"learning_rate", {{"initial", 5e-3}, {"peak", 5e-3}, {"warmup_steps", 0}, {"decay_rate", 0.0}}}}},
      {"evaluation", {{"rho_grid", {0.0, 0.5, 1.0}}, {"gamma_grid", {0.0, 1.0}}}},
  };
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_values(const ad::ParameterStore& a, const ad::ParameterStore& b) {
  if (a.size() != b.size()) return false;
  for (Index k = 0; k < a.size(); ++k) {
    if (a[k].name != b[k].name || a[k].value != b[k].value) return false;
  }
  return true;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("an empty config takes every default and validates") {
  const ExperimentConfig c = experiment_config_from_json(json::object());
  CHECK(c.seed == 0);
  CHECK(c.training.batch_size == 8);
  CHECK(c.training.adam.clip_norm == 10.0);
  CHECK(c.training.adam.weight_decay == 1e-5);
  CHECK(c.training.learning_rate.initial == 1e-4);
  CHECK(c.training.learning_rate.peak == 1e-2);
  CHECK(c.training.learning_rate.warmup_steps == 500);
  CHECK(c.generator.family == Family::Caching);
  const ExperimentConfig back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("config errors") {
  CHECK(code_of([] { experiment_config_from_json({{"trainig", json::object()}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"training", {{"stepz", 3}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"model", {{"seed", 3}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"generator", {{"seed", 3}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"training", {{"steps", "many"}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"training", {{"steps", 10}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { experiment_config_from_json({{"generator", {{"family", "sudoku"}}}}); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { load_experiment_config("/nonexistent/config.json"); }) == ErrorCode::IoFailure);
}

TEST_CASE("top-level seed reaches every stochastic component") {
  const ExperimentConfig c = experiment_config_from_json(toy_json(10));
  CHECK(c.generator.seed == 5);
  CHECK(c.model.seed == 5);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorCode::ConfigError) == 2);
  CHECK(exit_code(ErrorCode::TooManyBinaries) == 2);
  CHECK(exit_code(ErrorCode::MissingLabels) == 2);
  CHECK(exit_code(ErrorCode::NonFiniteValue) == 3);
  CHECK(exit_code(ErrorCode::OddOrder) == 3);
  CHECK(exit_code(ErrorCode::IoFailure) == 4);
  CHECK(exit_code(ErrorCode::ParseError) == 4);
}

TEST_CASE("generate is reproducible and honors split counts") {
  const ExperimentConfig c = experiment_config_from_json(toy_json(10));
  const fs::path a = fresh_dir("milpfix_gen_a");
  const fs::path b = fresh_dir("milpfix_gen_b");
  const Dataset d = cmd_generate(c, a);
  cmd_generate(c, b);
  CHECK(d.train.size() == 6);
  CHECK(d.validation.size() == 2);
  CHECK(d.test.size() == 2);
  const DatasetFiles fa = dataset_files(c, a);
  const DatasetFiles fb = dataset_files(c, b);
  CHECK(slurp(fa.train) == slurp(fb.train));
  CHECK(slurp(fa.test) == slurp(fb.test));
  const auto reread = load_series(fa.train);
  REQUIRE(reread.size() == d.train.size());
  for (std::size_t s = 0; s < reread.size(); ++s) {
    CHECK(reread[s].id == d.train[s].id);
    for (std::size_t t = 0; t < reread[s].steps.size(); ++t) {
      CHECK(reread[s].steps[t].c == d.train[s].steps[t].c);
      CHECK(Matrix(reread[s].steps[t].A) == Matrix(d.train[s].steps[t].A));
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("resume reproduces the uninterrupted run bit for bit") {
  const ExperimentConfig c = experiment_config_from_json(toy_json(8));
  Dataset d = generate_dataset(c.generator);
  label_dataset(d.train, {c.labeling.oracle, 0.5, 1, 1});
  label_dataset(d.validation, {c.labeling.oracle, 1.0, 2, 1});

  const TrainResult full = train(c, d.train, d.validation);
  TrainOptions stop;
  stop.on_step = [](const StepLog& s) { return s.step < 3; };
  const TrainResult first = train(c, d.train, d.validation, stop);
  CHECK(first.store.step == 4);
  TrainOptions resume;
  resume.resume = first.store;
  const TrainResult rest = train(c, d.train, d.validation, resume);
  CHECK(rest.store.step == 8);
  CHECK(same_values(rest.store, full.store));
  REQUIRE(rest.log.size() == 4);
  CHECK(rest.log.front().loss == full.log[4].loss);

  const TrainResult again = train(c, d.train, d.validation);
  CHECK(same_values(again.store, full.store));
  for (const auto& s : full.log) CHECK(std::isfinite(s.loss));
}

TEST_CASE("smoothed training loss decreases on the caching toy") {
  json j = toy_json(100);
  j["training"]["unsupervised"] = false;
  j["training"]["validate_every"] = 100;
  const ExperimentConfig c = experiment_config_from_json(j);
  Dataset d = generate_dataset(c.generator);
  label_dataset(d.train, {c.labeling.oracle, 1.0, 1, 1});
  const TrainResult r = train(c, d.train, d.validation);
  REQUIRE(r.log.size() == 100);
  auto window = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t k = from; k < from + 20; ++k) s += r.log[k].loss;
    return s / 20.0;
  };
  CHECK(window(80) < window(0));
  CHECK(window(40) < window(0));
}

TEST_CASE("supervised-only training without labels has nothing to learn from") {
  json j = toy_json(3);
  j["training"]["unsupervised"] = false;
  const ExperimentConfig c = experiment_config_from_json(j);
  const Dataset d = generate_dataset(c.generator);
  CHECK(code_of([&] { train(c, d.train, d.validation); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("command pipeline: zero steps, evaluation and prediction") {
  const fs::path dir = fresh_dir("milpfix_pipeline");
  json j = toy_json(0);
  const ExperimentConfig zero = experiment_config_from_json(j);
  cmd_generate(zero, dir);
  cmd_label(zero, dir);

  const TrainResult r0 = cmd_train(zero, dir);
  CHECK(r0.store.step == 0);
  LoadedModel initial = load_model(dir / "checkpoints" / "best.ckpt");
  CHECK(same_values(initial.store, init_parameters(zero.model)));

  const ExperimentConfig cfg = experiment_config_from_json(toy_json(6));
  cmd_train(cfg, dir);
  CHECK(fs::exists(dir / "checkpoints" / "last.ckpt"));
  const std::string log = slurp(dir / "train_log.csv");
  CHECK(log.rfind("step,lr,lambda", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 7);

  const EvaluationResult ev = cmd_evaluate(cfg, dir, dir / "checkpoints" / "best.ckpt");
  REQUIRE(ev.table.size() == 3);
  CHECK(ev.table[0].rho == 0.0);
  CHECK(ev.table[0].infeasibility.mean == 0.0);
  CHECK(ev.table[0].gap_abs.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fs::exists(dir / "results" / "metrics.tsv"));
  CHECK(fs::exists(dir / "results" / "gamma.json"));

  const fs::path data = dataset_files(cfg, dir).test;
  const fs::path ckpt = dir / "checkpoints" / "best.ckpt";
  const json none = cmd_predict(ckpt, data, 0.0, 0.0, {}, dir / "p0.json");
  const json all = cmd_predict(ckpt, data, 1.0, 0.0, {}, dir / "p1.json");
  const auto test = load_series(data);
  const json& s0 = none.is_array() ? none[0] : none;
  const json& s1 = all.is_array() ? all[0] : all;
  const json& step0 = s0["steps"][0];
  CHECK(step0["selected"].empty());
  CHECK(step0["solution"]["objective"].get<double>() == doctest::Approx(test[0].labels[0]->objective));
  CHECK(s1["steps"][0]["selected"].size() == static_cast<std::size_t>(test[0].steps[0].num_binary));
  const json again = cmd_predict(ckpt, data, 1.0, 0.0, {}, dir / "p2.json");
  CHECK(again == all);
  CHECK(slurp(dir / "p1.json") == slurp(dir / "p2.json"));
  fs::remove_all(dir);
}
