// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing: configuration, dataset files, training, evaluation
// and single-series prediction. Every path is relative to a run directory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "milpfix/autodiff.hpp"
#include "milpfix/datagen.hpp"
#include "milpfix/loss.hpp"
#include "milpfix/model.hpp"
#include "milpfix/optim.hpp"
#include "milpfix/select.hpp"

namespace milpfix {

struct LabelingConfig {
  double fraction = 1.0;  // training split only; validation and test are always fully labeled
  OracleOptions oracle;
  unsigned threads = 0;
};

struct TrainingConfig {
  Index batch_size = 8;
  std::int64_t steps = 1000;
  std::int64_t validate_every = 50;
  /// Instances are normalized as if they had this many variables; 0 keeps
  /// the plain normalization.
  Index reference_size = 0;
  /// False drops the objective/penalty term (λ ≡ 0) and trains on labeled
  /// instances only.
  bool unsupervised = true;
  LossWeights loss;
  ad::LearningRateSchedule learning_rate;
  ad::AdamOptions adam;
  unsigned threads = 0;
};

struct EvaluationConfig {
  std::vector<double> rho_grid{0.3, 0.5, 0.7};
  std::vector<double> gamma_grid{0.0, 0.5, 1.0, 2.0};
  Backend backend = Backend::Oracle;
  OracleOptions oracle;
  bool measure_full_time = true;
};

struct PathsConfig {
  std::string data = "data";
  std::string checkpoints = "checkpoints";
  std::string results = "results";
  std::string log = "train_log.csv";
};

struct ExperimentConfig {
  /// Seeds generation, labeling subsets, initialization and batching.
  std::uint64_t seed = 0;
  GeneratorSpec generator;
  ModelConfig model;
  LabelingConfig labeling;
  TrainingConfig training;
  EvaluationConfig evaluation;
  PathsConfig paths;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Defaults for every missing key; unknown keys and per-section seeds raise
/// ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Exit status of the command-line tool for a library error.
int exit_code(ErrorCode code);

/// `MILPFIX_RUN_DIR` when set, otherwise the current directory.
std::filesystem::path default_run_dir();

struct DatasetFiles {
  std::filesystem::path train, validation, test;
};
DatasetFiles dataset_files(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Generates and writes the three splits, unlabeled.
Dataset cmd_generate(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Labels the stored splits in place: a seeded `fraction` of the training
/// instances, every validation and test instance.
Dataset cmd_label(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Prepared copy of a split with padding sizes shared by all its instances.
struct PreparedSet {
  const std::vector<InstanceSeries>* raw = nullptr;
  std::vector<std::vector<PreparedInstance>> prepared;
  TripletMaxima maxima;
};

/// Padding only changes tensor layout, not outputs, so the sizes are the
/// elementwise maximum of `floor` and the set's own requirements.
PreparedSet prepare_set(const std::vector<InstanceSeries>& series, Index reference_size,
                        const TripletMaxima& floor = {});

struct StepLog {
  std::int64_t step = 0;
  double learning_rate = 0.0;
  LossValues lambdas;
  double loss = 0.0;
  double nll = 0.0;
  double reg = 0.0;
  double objective = 0.0;
  double penalty = 0.0;
  double grad_norm = 0.0;
  std::optional<double> validation_nll;
};

struct TrainResult {
  ad::ParameterStore store;       // final parameters
  ad::ParameterStore best_store;  // best validation NLL (final when there is no validation signal)
  std::optional<double> best_validation_nll;
  std::int64_t best_step = 0;
  std::vector<StepLog> log;
};

struct TrainOptions {
  /// Continue from this parameter state (its `step` counter included).
  std::optional<ad::ParameterStore> resume;
  /// Called after every step; return false to stop early.
  std::function<bool(const StepLog&)> on_step;
};

/// Mean supervised NLL per labeled binary over `set`; nullopt without labels.
std::optional<double> validation_nll(ad::ParameterStore& store, const ModelConfig& model, const PreparedSet& set,
                                     int quadrature_order = 64, unsigned threads = 0);

/// Mini-batches of equal-length whole series. Throws NonFiniteValue naming the
/// step when the loss or gradient stops being finite.
TrainResult train(const ExperimentConfig& config, const std::vector<InstanceSeries>& train_series,
                  const std::vector<InstanceSeries>& validation_series, const TrainOptions& options = {});

/// Checkpoint metadata: model config, padding sizes, normalization size.
nlohmann::json checkpoint_meta(const ExperimentConfig& config, const TripletMaxima& maxima, std::int64_t step,
                               std::optional<double> validation);

struct LoadedModel {
  ad::ParameterStore store;
  ModelConfig config;
  TripletMaxima maxima;
  Index reference_size = 0;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

/// Trains on the stored splits; writes `best.ckpt`, `last.ckpt` and the CSV
/// log. With `resume` the last checkpoint is continued.
TrainResult cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir, bool resume = false);

/// α, β per series and timestep, aligned with `set.raw`.
std::vector<std::vector<ModelOutput>> predict_set(LoadedModel& model, const PreparedSet& set, unsigned threads = 0);

std::vector<EvalItem> eval_items(const std::vector<InstanceSeries>& series,
                                 const std::vector<std::vector<ModelOutput>>& outputs);

struct EvaluationResult {
  std::vector<double> gammas;  // tuned per ρ, aligned with the ρ grid
  std::vector<EvalRecord> records;
  std::vector<MetricRow> table;
};

/// Tunes γ on the validation items for each ρ, then evaluates the test items.
/// The export backend writes its MPS files to `export_dir`.
EvaluationResult evaluate_model(LoadedModel& model, const ExperimentConfig& config,
                                const std::vector<InstanceSeries>& validation,
                                const std::vector<InstanceSeries>& test,
                                const std::filesystem::path& export_dir = {});

/// Runs `evaluate_model` on the stored splits and writes `metrics.tsv`,
/// `records.jsonl` and `gamma.json` under the results directory.
EvaluationResult cmd_evaluate(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                              const std::filesystem::path& checkpoint);

/// Per-step prediction for one series: α, β, μ, σ, scores, the fixed set
/// and, with the oracle backend, the completed solution.
nlohmann::json predict_series(LoadedModel& model, const InstanceSeries& series, double rho, double gamma,
                              const SolveBackend& backend);

/// Reads an MPS file (one step) or a series file (every series) and writes
/// the prediction JSON to `output`.
nlohmann::json cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& instance_file,
                           double rho, double gamma, const SolveBackend& backend,
                           const std::filesystem::path& output);

}  // namespace milpfix
