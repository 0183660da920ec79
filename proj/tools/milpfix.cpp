// SPDX-License-Identifier: Apache-2.0
//
// milpfix generate | label | train | evaluate | predict
//
// Exit status: 0 ok, 2 configuration, 3 numerical failure, 4 I/O.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "milpfix/harness.hpp"
#include "milpfix/io.hpp"

namespace fs = std::filesystem;
using namespace milpfix;

namespace {

struct Common {
  std::string config;
  std::string run_dir;
};

ExperimentConfig load_config(const Common& c) {
  return c.config.empty() ? experiment_config_from_json(nlohmann::json::object()) : load_experiment_config(c.config);
}

fs::path run_dir(const Common& c) {
  const fs::path dir = c.run_dir.empty() ? default_run_dir() : fs::path(c.run_dir);
  fs::create_directories(dir);
  return dir;
}

void print_table(const EvaluationResult& r) {
  write_metric_table(r.table, "model", std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable fixing for temporal binary MILPs"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config, "Experiment config (JSON); defaults apply to missing keys");
  app.add_option("-r,--run-dir", common.run_dir, "Run directory (default: $MILPFIX_RUN_DIR or the current directory)");

  auto* generate = app.add_subcommand("generate", "Write train/val/test series");
  std::string dump_config;
  app.add_option("--dump-config", dump_config, "Also write the effective config to this file");

  auto* label = app.add_subcommand("label", "Solve the stored instances with the exact oracle");
  double fraction = -1.0;
  label->add_option("--fraction", fraction, "Labeled share of the training instances");

  auto* train = app.add_subcommand("train", "Train and keep the best-validation checkpoint");
  bool resume = false;
  std::int64_t steps = -1;
  train->add_flag("--resume", resume, "Continue from checkpoints/last.ckpt");
  train->add_option("--steps", steps, "Override training.steps");

  auto* evaluate = app.add_subcommand("evaluate", "Tune gamma on validation, report test metrics");
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint (default: checkpoints/best.ckpt)");

  auto* predict = app.add_subcommand("predict", "Predict, fix and complete one instance or series file");
  std::string instance_file;
  std::string output;
  double rho = 0.3;
  double gamma = 0.0;
  std::string backend = "oracle";
  predict->add_option("--checkpoint", checkpoint, "Checkpoint (default: checkpoints/best.ckpt)");
  predict->add_option("instance", instance_file, "MPS file or series file")->required();
  predict->add_option("--rho", rho, "Share of binaries to fix")->check(CLI::Range(0.0, 1.0));
  predict->add_option("--gamma", gamma, "Uncertainty weight of the score");
  predict->add_option("--backend", backend, "oracle | export")->check(CLI::IsMember({"oracle", "export"}));
  predict->add_option("-o,--output", output, "Output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig config = load_config(common);
    const fs::path dir = run_dir(common);
    if (!dump_config.empty()) {
      std::ofstream f(dump_config);
      if (!f) fail(ErrorCode::IoFailure, "cannot write " + dump_config);
      f << to_json(config).dump(2) << '\n';
    }
    const fs::path default_ckpt = dir / config.paths.checkpoints / "best.ckpt";

    if (generate->parsed()) {
      const Dataset d = cmd_generate(config, dir);
      std::cout << "generated " << d.train.size() << "/" << d.validation.size() << "/" << d.test.size()
                << " series under " << (dir / config.paths.data).string() << '\n';
    } else if (label->parsed()) {
      if (fraction >= 0.0) config.labeling.fraction = fraction;
      config.validate();
      const Dataset d = cmd_label(config, dir);
      Index n = 0;
      for (const auto& s : d.train) n += s.num_labeled();
      std::cout << "labeled " << n << " training instances\n";
    } else if (train->parsed()) {
      if (steps >= 0) config.training.steps = steps;
      config.validate();
      const TrainResult r = cmd_train(config, dir, resume);
      std::cout << "trained to step " << r.store.step;
      if (r.best_validation_nll) std::cout << ", best validation NLL " << *r.best_validation_nll << " at step " << r.best_step;
      std::cout << '\n';
    } else if (evaluate->parsed()) {
      print_table(cmd_evaluate(config, dir, checkpoint.empty() ? default_ckpt : fs::path(checkpoint)));
    } else if (predict->parsed()) {
      SolveBackend b{backend == "oracle" ? Backend::Oracle : Backend::Export, config.evaluation.oracle,
                     dir / config.paths.results / "mps"};
      if (b.kind == Backend::Export) fs::create_directories(b.export_dir);
      const auto out = cmd_predict(checkpoint.empty() ? default_ckpt : fs::path(checkpoint), instance_file, rho,
                                   gamma, b, output);
      if (output.empty()) std::cout << out.dump(2) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "milpfix: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "milpfix: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
