// SPDX-License-Identifier: Apache-2.0
#include "milpfix/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>

#include "milpfix/config_fields.hpp"
#include "milpfix/io.hpp"
#include "milpfix/parallel.hpp"

namespace milpfix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json oracle_to_json(const OracleOptions& o) {
  return {{"max_binaries", o.max_binaries}, {"prune", o.prune},         {"knapsack_dp", o.knapsack_dp},
          {"feasibility_tol", o.feasibility_tol}, {"tie_tol", o.tie_tol}, {"max_pivots", o.lp.max_pivots}};
}

void read_oracle(ConfigFields& parent, OracleOptions& o, const std::string& section) {
  if (const json* sec = parent.section("oracle")) {
    ConfigFields f(*sec, section + ".oracle");
    f.read("max_binaries", o.max_binaries)
        .read("prune", o.prune)
        .read("knapsack_dp", o.knapsack_dp)
        .read("feasibility_tol", o.feasibility_tol)
        .read("tie_tol", o.tie_tol)
        .read("max_pivots", o.lp.max_pivots);
    f.finish();
  }
}

json schedule_to_json(const Schedule& s) {
  return {{"warmup_steps", s.warmup_steps},
          {"warmup_initial", s.warmup_initial},
          {"warmup_final", s.warmup_final},
          {"final_value", s.final_value}};
}

void read_schedule(ConfigFields& parent, const std::string& key, Schedule& s, const std::string& section) {
  if (const json* sec = parent.section(key)) {
    if (sec->is_number()) {
      s = Schedule::constant(sec->get<double>());
      return;
    }
    ConfigFields f(*sec, section + "." + key);
    f.read("warmup_steps", s.warmup_steps)
        .read("warmup_initial", s.warmup_initial)
        .read("warmup_final", s.warmup_final)
        .read("final_value", s.final_value);
    f.finish();
  }
}

std::string backend_name(Backend b) { return b == Backend::Oracle ? "oracle" : "export"; }

Backend backend_from_string(const std::string& name) {
  if (name == "oracle") return Backend::Oracle;
  if (name == "export") return Backend::Export;
  fail(ErrorCode::ConfigError, "unknown backend '" + name + "' (oracle | export)");
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ConfigError, what);
}

std::vector<InstanceSeries> read_split(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::IoFailure, "missing dataset file " + path.string());
  return load_series(path);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kBatchStream = 2;

bool labeled(const InstanceSeries& s, std::size_t t) {
  return t < s.labels.size() && s.labels[t] && s.labels[t]->status == SolveStatus::Optimal;
}

}  // namespace

void ExperimentConfig::validate() const {
  generator.validate();
  model.validate();
  require(labeling.fraction >= 0.0 && labeling.fraction <= 1.0, "labeling.fraction must lie in [0, 1]");
  const auto& t = training;
  require(t.batch_size > 0, "training.batch_size must be positive");
  require(t.steps >= 0, "training.steps must be nonnegative");
  require(t.validate_every > 0, "training.validate_every must be positive");
  require(t.reference_size >= 0, "training.reference_size must be nonnegative");
  require(t.loss.quadrature_order >= 4 && t.loss.quadrature_order % 2 == 0,
          "training.loss.quadrature_order must be even and at least 4");
  for (const auto* s : {&t.loss.lambda, &t.loss.lambda_reg, &t.loss.lambda_c}) {
    require(s->warmup_steps >= 0 && s->warmup_steps <= t.steps,
            "loss schedule warm-up must end within training.steps");
  }
  require(t.learning_rate.warmup_steps >= 0 && t.learning_rate.warmup_steps <= t.steps,
          "learning-rate warm-up must end within training.steps");
  require(t.learning_rate.decay_rate >= 0.0 && t.learning_rate.decay_rate <= 1.0,
          "training.learning_rate.decay_rate must lie in [0, 1]");
  require(!evaluation.rho_grid.empty(), "evaluation.rho_grid must not be empty");
  for (double rho : evaluation.rho_grid) require(rho >= 0.0 && rho <= 1.0, "evaluation.rho_grid entries lie in [0, 1]");
  require(!evaluation.gamma_grid.empty(), "evaluation.gamma_grid must not be empty");
}

json to_json(const ExperimentConfig& c) {
  json gen = to_json(c.generator);
  gen.erase("seed");
  json model = to_json(c.model);
  model.erase("seed");
  const auto& t = c.training;
  return {
      {"seed", c.seed},
      {"generator", gen},
      {"model", model},
      {"labeling", {{"fraction", c.labeling.fraction}, {"threads", c.labeling.threads},
                    {"oracle", oracle_to_json(c.labeling.oracle)}}},
      {"training",
       {{"batch_size", t.batch_size},
        {"steps", t.steps},
        {"validate_every", t.validate_every},
        {"reference_size", t.reference_size},
        {"unsupervised", t.unsupervised},
        {"threads", t.threads},
        {"loss",
         {{"lambda", schedule_to_json(t.loss.lambda)},
          {"lambda_reg", schedule_to_json(t.loss.lambda_reg)},
          {"lambda_c", schedule_to_json(t.loss.lambda_c)},
          {"use_class_weights", t.loss.use_class_weights},
          {"soft_assignment", {{"sharpened", t.loss.soft.sharpened}, {"sharpness", t.loss.soft.sharpness}}},
          {"quadrature_order", t.loss.quadrature_order}}},
        {"learning_rate",
         {{"initial", t.learning_rate.initial},
          {"peak", t.learning_rate.peak},
          {"warmup_steps", t.learning_rate.warmup_steps},
          {"decay_rate", t.learning_rate.decay_rate}}},
        {"adam",
         {{"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"epsilon", t.adam.epsilon},
          {"weight_decay", t.adam.weight_decay},
          {"clip_norm", t.adam.clip_norm}}}}},
      {"evaluation",
       {{"rho_grid", c.evaluation.rho_grid},
        {"gamma_grid", c.evaluation.gamma_grid},
        {"backend", backend_name(c.evaluation.backend)},
        {"oracle", oracle_to_json(c.evaluation.oracle)},
        {"measure_full_time", c.evaluation.measure_full_time}}},
      {"paths",
       {{"data", c.paths.data}, {"checkpoints", c.paths.checkpoints}, {"results", c.paths.results},
        {"log", c.paths.log}}},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  ConfigFields top(j, "config");
  top.read("seed", c.seed);
  if (const json* sec = top.section("generator")) {
    if (sec->is_object() && sec->contains("seed")) fail(ErrorCode::ConfigError, "generator.seed: use the top-level seed");
    c.generator = generator_spec_from_json(*sec);
  }
  if (const json* sec = top.section("model")) {
    if (sec->is_object() && sec->contains("seed")) fail(ErrorCode::ConfigError, "model.seed: use the top-level seed");
    c.model = model_config_from_json(*sec);
  }
  if (const json* sec = top.section("labeling")) {
    ConfigFields f(*sec, "labeling");
    f.read("fraction", c.labeling.fraction).read("threads", c.labeling.threads);
    read_oracle(f, c.labeling.oracle, "labeling");
    f.finish();
  }
  if (const json* sec = top.section("training")) {
    auto& t = c.training;
    ConfigFields f(*sec, "training");
    f.read("batch_size", t.batch_size)
        .read("steps", t.steps)
        .read("validate_every", t.validate_every)
        .read("reference_size", t.reference_size)
        .read("unsupervised", t.unsupervised)
        .read("threads", t.threads);
    if (const json* loss = f.section("loss")) {
      ConfigFields l(*loss, "training.loss");
      read_schedule(l, "lambda", t.loss.lambda, "training.loss");
      read_schedule(l, "lambda_reg", t.loss.lambda_reg, "training.loss");
      read_schedule(l, "lambda_c", t.loss.lambda_c, "training.loss");
      l.read("use_class_weights", t.loss.use_class_weights).read("quadrature_order", t.loss.quadrature_order);
      if (const json* soft = l.section("soft_assignment")) {
        ConfigFields s(*soft, "training.loss.soft_assignment");
        s.read("sharpened", t.loss.soft.sharpened).read("sharpness", t.loss.soft.sharpness);
        s.finish();
      }
      l.finish();
    }
    if (const json* lr = f.section("learning_rate")) {
      ConfigFields l(*lr, "training.learning_rate");
      l.read("initial", t.learning_rate.initial)
          .read("peak", t.learning_rate.peak)
          .read("warmup_steps", t.learning_rate.warmup_steps)
          .read("decay_rate", t.learning_rate.decay_rate);
      l.finish();
    }
    if (const json* adam = f.section("adam")) {
      ConfigFields a(*adam, "training.adam");
      a.read("beta1", t.adam.beta1)
          .read("beta2", t.adam.beta2)
          .read("epsilon", t.adam.epsilon)
          .read("weight_decay", t.adam.weight_decay)
          .read("clip_norm", t.adam.clip_norm);
      a.finish();
    }
    f.finish();
  }
  if (const json* sec = top.section("evaluation")) {
    auto& e = c.evaluation;
    ConfigFields f(*sec, "evaluation");
    std::string backend = backend_name(e.backend);
    f.read("rho_grid", e.rho_grid)
        .read("gamma_grid", e.gamma_grid)
        .read("backend", backend)
        .read("measure_full_time", e.measure_full_time);
    e.backend = backend_from_string(backend);
    read_oracle(f, e.oracle, "evaluation");
    f.finish();
  }
  if (const json* sec = top.section("paths")) {
    ConfigFields f(*sec, "paths");
    f.read("data", c.paths.data)
        .read("checkpoints", c.paths.checkpoints)
        .read("results", c.paths.results)
        .read("log", c.paths.log);
    f.finish();
  }
  top.finish();
  c.generator.seed = c.seed;
  c.model.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::TooManyBinaries:
    case ErrorCode::SizeExceedsOracle:
    case ErrorCode::GenerationFailed:
    case ErrorCode::MissingLabels:
    case ErrorCode::EmptyDataset:
    case ErrorCode::MaximaExceeded:
      return 2;
    case ErrorCode::NonFiniteValue:
    case ErrorCode::IterationLimit:
    case ErrorCode::ZeroNormRow:
    case ErrorCode::ZeroObjective:
    case ErrorCode::NotScalar:
    case ErrorCode::OddOrder:
      return 3;
    case ErrorCode::IoFailure:
    case ErrorCode::ParseError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ShapeMismatch:
      return 4;
  }
  return 1;
}

fs::path default_run_dir() {
  const char* env = std::getenv("MILPFIX_RUN_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::current_path();
}

DatasetFiles dataset_files(const ExperimentConfig& config, const fs::path& run_dir) {
  const fs::path dir = run_dir / config.paths.data;
  return {dir / "train.jsonl", dir / "val.jsonl", dir / "test.jsonl"};
}

Dataset cmd_generate(const ExperimentConfig& config, const fs::path& run_dir) {
  Dataset data = generate_dataset(config.generator);
  const DatasetFiles files = dataset_files(config, run_dir);
  fs::create_directories(files.train.parent_path());
  save_series(data.train, files.train);
  save_series(data.validation, files.validation);
  save_series(data.test, files.test);
  return data;
}

Dataset cmd_label(const ExperimentConfig& config, const fs::path& run_dir) {
  const DatasetFiles files = dataset_files(config, run_dir);
  Dataset data{read_split(files.train), read_split(files.validation), read_split(files.test)};
  LabelOptions opts{config.labeling.oracle, config.labeling.fraction, derive_seed(config.seed, kLabelStream),
                    config.labeling.threads};
  label_dataset(data.train, opts);
  opts.fraction = 1.0;
  label_dataset(data.validation, opts);
  label_dataset(data.test, opts);
  save_series(data.train, files.train);
  save_series(data.validation, files.validation);
  save_series(data.test, files.test);
  return data;
}

PreparedSet prepare_set(const std::vector<InstanceSeries>& series, Index reference_size, const TripletMaxima& floor) {
  PreparedSet set;
  set.raw = &series;
  std::vector<MilpInstance> normalized;
  for (const auto& s : series) {
    for (const auto& inst : s.steps) {
      normalized.push_back(reference_size > 0 ? normalize_rescaled(inst, reference_size) : normalize(inst));
    }
  }
  const TripletMaxima own = dataset_maxima(normalized);
  set.maxima = {std::max(floor.max_cons_per_var, own.max_cons_per_var),
                std::max(floor.max_vars_per_con, own.max_vars_per_con)};
  set.prepared.resize(series.size());
  parallel_for(static_cast<Index>(series.size()), 0, [&](Index s) {
    set.prepared[static_cast<std::size_t>(s)] = prepare_series(series[static_cast<std::size_t>(s)], set.maxima, reference_size);
  });
  return set;
}

std::optional<double> validation_nll(ad::ParameterStore& store, const ModelConfig& model, const PreparedSet& set,
                                     int quadrature_order, unsigned threads) {
  const auto& table = cc_table<double>(quadrature_order);
  const std::size_t n = set.prepared.size();
  std::vector<double> sums(n, 0.0);
  std::vector<Index> counts(n, 0);
  parallel_for(static_cast<Index>(n), threads, [&](Index si) {
    const auto s = static_cast<std::size_t>(si);
    const InstanceSeries& raw = (*set.raw)[s];
    bool any = false;
    for (std::size_t t = 0; t < raw.steps.size(); ++t) any = any || labeled(raw, t);
    if (!any || set.prepared[s].empty()) return;
    const auto outputs = forward_series(store, model, set.prepared[s]);
    for (std::size_t t = 0; t < raw.steps.size(); ++t) {
      if (!labeled(raw, t)) continue;
      const Label& label = *raw.labels[t];
      for (Index j = 0; j < outputs[t].alpha.size(); ++j) {
        sums[s] += beta_bernoulli_nll<double>(outputs[t].alpha(j), outputs[t].beta(j), label.z(j), table);
        ++counts[s];
      }
    }
  });
  double total = 0.0;
  Index count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    total += sums[s];
    count += counts[s];
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

nlohmann::json checkpoint_meta(const ExperimentConfig& config, const TripletMaxima& maxima, std::int64_t step,
                               std::optional<double> validation) {
  json meta = {{"model", to_json(config.model)},
               {"maxima", {maxima.max_cons_per_var, maxima.max_vars_per_con}},
               {"reference_size", config.training.reference_size},
               {"step", step},
               {"family", std::string(to_string(config.generator.family))}};
  meta["validation_nll"] = validation ? json(*validation) : json(nullptr);
  return meta;
}

LoadedModel load_model(const fs::path& checkpoint) {
  ad::Checkpoint ck = ad::load_checkpoint(checkpoint);
  LoadedModel m;
  m.store = std::move(ck.store);
  try {
    m.config = model_config_from_json(ck.meta.at("model"));
    m.maxima = {ck.meta.at("maxima").at(0).get<Index>(), ck.meta.at("maxima").at(1).get<Index>()};
    m.reference_size = ck.meta.value("reference_size", Index{0});
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, checkpoint.string() + ": bad metadata: " + e.what());
  }
  return m;
}

TrainResult train(const ExperimentConfig& config, const std::vector<InstanceSeries>& train_series,
                  const std::vector<InstanceSeries>& validation_series, const TrainOptions& options) {
  config.validate();
  const TrainingConfig& tc = config.training;
  const PreparedSet train_set = prepare_set(train_series, tc.reference_size);
  const PreparedSet val_set = prepare_set(validation_series, tc.reference_size, train_set.maxima);

  // Batches draw from series of one length; supervised-only runs skip
  // series without a single label.
  std::map<Index, std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < train_series.size(); ++s) {
    if (train_series[s].steps.empty()) continue;
    if (!tc.unsupervised && train_series[s].num_labeled() == 0) continue;
    groups[train_series[s].length()].push_back(s);
  }
  if (groups.empty()) fail(ErrorCode::EmptyDataset, "no usable training series");
  std::size_t usable = 0;
  for (const auto& [len, members] : groups) usable += members.size();

  std::optional<Vector> rates;
  if (tc.loss.use_class_weights) rates = class_rates(train_series);
  const auto& table = cc_table<double>(tc.loss.quadrature_order);

  TrainResult result;
  result.store = options.resume ? *options.resume : init_parameters(config.model);
  result.best_store = result.store;
  const std::uint64_t batch_seed = derive_seed(config.seed, kBatchStream);

  for (std::int64_t step = result.store.step; step < tc.steps; ++step) {
    std::seed_seq seq{static_cast<std::uint32_t>(batch_seed), static_cast<std::uint32_t>(batch_seed >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
    std::mt19937_64 rng(seq);
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, usable - 1)(rng);
    auto group = groups.begin();
    while (pick >= group->second.size()) {
      pick -= group->second.size();
      ++group;
    }
    std::vector<std::size_t> members = group->second;
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(std::min<std::size_t>(members.size(), static_cast<std::size_t>(tc.batch_size)));
    std::sort(members.begin(), members.end());

    std::vector<const std::vector<PreparedInstance>*> batch;
    for (std::size_t s : members) batch.push_back(&train_set.prepared[s]);

    StepLog log;
    log.step = step;
    try {
      ad::Tape tape;
      const BatchOutput out = forward_batch(tape, result.store, config.model, batch);
      const Index nb = out.alpha.rows();
      ad::SupervisedTargets targets{Vector::Zero(nb), Vector::Zero(nb), Vector::Ones(nb)};
      for (const InstanceSlot& slot : out.slots) {
        const InstanceSeries& raw = train_series[members[static_cast<std::size_t>(slot.series)]];
        if (!labeled(raw, static_cast<std::size_t>(slot.t))) continue;
        const Vector zb = raw.labels[static_cast<std::size_t>(slot.t)]->z.head(slot.num_binary);
        targets.z.segment(slot.binary_offset, slot.num_binary) = zb;
        targets.mask.segment(slot.binary_offset, slot.num_binary).setOnes();
        if (rates) targets.weight.segment(slot.binary_offset, slot.num_binary) = class_weights(*rates, zb);
      }
      const ad::SupervisedTerms sup = ad::supervised_terms(out.alpha, out.beta, targets, table);
      log.lambdas = schedule_values(tc.loss, step, tc.steps);
      if (!tc.unsupervised) log.lambdas.lambda = 0.0;
      ad::UnsupervisedTerms unsup;
      if (log.lambdas.lambda > 0.0) {
        const StackedSystem sys = stack_systems(batch);
        const ad::Tensor soft = ad::soft_assignment(out.all.alpha, out.all.beta, tc.loss.soft);
        const ad::Tensor z_hat = ad::add(ad::mul_const(soft, sys.binary_mask),
                                         ad::mul_const(out.all.continuous, Vector::Ones(sys.binary_mask.size()) - sys.binary_mask));
        unsup = ad::unsupervised_terms(z_hat, {sys.A, sys.b, sys.c});
      } else {
        unsup = {tape.constant(Matrix::Zero(1, 1)), tape.constant(Matrix::Zero(1, 1))};
      }
      const double per_instance = 1.0 / static_cast<double>(out.slots.size());
      const ad::Tensor loss = ad::scale(ad::total_loss(sup, unsup, log.lambdas), per_instance);
      log.loss = loss.item();
      log.nll = sup.nll.item() * per_instance;
      log.reg = sup.reg.item() * per_instance;
      log.objective = unsup.objective.item() * per_instance;
      log.penalty = unsup.penalty.item() * per_instance;
      if (!std::isfinite(log.loss)) fail(ErrorCode::NonFiniteValue, "loss is not finite");
      result.store.zero_grad();
      tape.backward(loss);
      log.learning_rate = tc.learning_rate.value(step, tc.steps);
      log.grad_norm = ad::adam_step(result.store, log.learning_rate, tc.adam);
      if (!std::isfinite(log.grad_norm)) fail(ErrorCode::NonFiniteValue, "gradient norm is not finite");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue) throw;
      fail(ErrorCode::NonFiniteValue, "training step " + std::to_string(step) + ": " + e.what());
    }

    if ((step + 1) % tc.validate_every == 0 || step + 1 == tc.steps) {
      log.validation_nll = validation_nll(result.store, config.model, val_set, tc.loss.quadrature_order, tc.threads);
      if (log.validation_nll && (!result.best_validation_nll || *log.validation_nll < *result.best_validation_nll)) {
        result.best_validation_nll = log.validation_nll;
        result.best_store = result.store;
        result.best_step = step + 1;
      }
    }
    result.log.push_back(log);
    if (options.on_step && !options.on_step(log)) break;
  }
  if (!result.best_validation_nll) {
    result.best_store = result.store;
    result.best_step = result.store.step;
  }
  return result;
}

TrainResult cmd_train(const ExperimentConfig& config, const fs::path& run_dir, bool resume) {
  const DatasetFiles files = dataset_files(config, run_dir);
  const auto train_series = read_split(files.train);
  const auto val_series = read_split(files.validation);
  const fs::path ckdir = run_dir / config.paths.checkpoints;
  fs::create_directories(ckdir);

  TrainOptions options;
  if (resume) options.resume = ad::load_checkpoint(ckdir / "last.ckpt").store;

  const fs::path log_path = run_dir / config.paths.log;
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) fail(ErrorCode::IoFailure, "cannot write " + log_path.string());
  if (!resume) log << "step,lr,lambda,lambda_reg,lambda_c,loss,nll,reg,objective,penalty,grad_norm,val_nll\n";
  log.precision(10);
  options.on_step = [&](const StepLog& s) {
    log << s.step << ',' << s.learning_rate << ',' << s.lambdas.lambda << ',' << s.lambdas.lambda_reg << ','
        << s.lambdas.lambda_c << ',' << s.loss << ',' << s.nll << ',' << s.reg << ',' << s.objective << ','
        << s.penalty << ',' << s.grad_norm << ',';
    if (s.validation_nll) log << *s.validation_nll;
    log << '\n';
    return true;
  };

  TrainResult result;
  try {
    result = train(config, train_series, val_series, options);
  } catch (const Error& e) {
    log << "# aborted: " << e.what() << '\n';
    throw;
  }
  const TripletMaxima maxima = prepare_set(train_series, config.training.reference_size).maxima;
  ad::save_checkpoint(result.best_store, checkpoint_meta(config, maxima, result.best_step, result.best_validation_nll),
                      ckdir / "best.ckpt");
  ad::save_checkpoint(result.store, checkpoint_meta(config, maxima, result.store.step, result.best_validation_nll),
                      ckdir / "last.ckpt");
  return result;
}

std::vector<std::vector<ModelOutput>> predict_set(LoadedModel& model, const PreparedSet& set, unsigned threads) {
  std::vector<std::vector<ModelOutput>> out(set.prepared.size());
  parallel_for(static_cast<Index>(out.size()), threads, [&](Index s) {
    const auto& series = set.prepared[static_cast<std::size_t>(s)];
    if (!series.empty()) out[static_cast<std::size_t>(s)] = forward_series(model.store, model.config, series);
  });
  return out;
}

std::vector<EvalItem> eval_items(const std::vector<InstanceSeries>& series,
                                 const std::vector<std::vector<ModelOutput>>& outputs) {
  std::vector<EvalItem> items;
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (std::size_t t = 0; t < series[s].steps.size(); ++t) {
      EvalItem item;
      item.series = series[s].id;
      item.t = static_cast<Index>(t);
      item.instance = &series[s].steps[t];
      item.label = labeled(series[s], t) ? &*series[s].labels[t] : nullptr;
      item.alpha = outputs[s][t].alpha;
      item.beta = outputs[s][t].beta;
      items.push_back(std::move(item));
    }
  }
  return items;
}

EvaluationResult evaluate_model(LoadedModel& model, const ExperimentConfig& config,
                                const std::vector<InstanceSeries>& validation,
                                const std::vector<InstanceSeries>& test, const fs::path& export_dir) {
  const auto& ec = config.evaluation;
  const PreparedSet val_set = prepare_set(validation, model.reference_size, model.maxima);
  const PreparedSet test_set = prepare_set(test, model.reference_size, model.maxima);
  const auto val_items = eval_items(validation, predict_set(model, val_set));
  const auto test_items = eval_items(test, predict_set(model, test_set));

  // γ is tuned against oracle completions whichever backend runs the test.
  SolveBackend tuning{Backend::Oracle, ec.oracle, {}};
  SolveBackend backend{ec.backend, ec.oracle, export_dir};
  EvaluationResult result;
  std::vector<double> sorted_grid = ec.gamma_grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  for (double rho : ec.rho_grid) {
    const double gamma = val_items.empty() ? sorted_grid.front() : tune_gamma(val_items, rho, ec.gamma_grid, tuning);
    result.gammas.push_back(gamma);
    EvalOptions opts;
    opts.rho_grid = {rho};
    opts.gamma = gamma;
    opts.backend = backend;
    opts.measure_full_time = ec.measure_full_time;
    auto records = evaluate(test_items, opts);
    result.records.insert(result.records.end(), records.begin(), records.end());
  }
  result.table = summarize(result.records);
  return result;
}

EvaluationResult cmd_evaluate(const ExperimentConfig& config, const fs::path& run_dir, const fs::path& checkpoint) {
  const DatasetFiles files = dataset_files(config, run_dir);
  const auto validation = read_split(files.validation);
  const auto test = read_split(files.test);
  LoadedModel model = load_model(checkpoint);
  const ExperimentConfig& cfg = config;
  const fs::path results = run_dir / config.paths.results;
  fs::create_directories(results);
  if (cfg.evaluation.backend == Backend::Export) fs::create_directories(results / "mps");
  const EvaluationResult result = evaluate_model(model, cfg, validation, test, results / "mps");
  std::ofstream table(results / "metrics.tsv");
  std::ofstream records(results / "records.jsonl");
  std::ofstream gammas(results / "gamma.json");
  if (!table || !records || !gammas) fail(ErrorCode::IoFailure, "cannot write under " + results.string());
  write_metric_table(result.table, "model", table);
  write_records(result.records, records);
  json g = json::array();
  for (std::size_t k = 0; k < result.gammas.size(); ++k) {
    g.push_back({{"rho", cfg.evaluation.rho_grid[k]}, {"gamma", result.gammas[k]}});
  }
  gammas << g.dump(2) << '\n';
  return result;
}

json predict_series(LoadedModel& model, const InstanceSeries& series, double rho, double gamma,
                    const SolveBackend& backend) {
  std::vector<InstanceSeries> one{series};
  const PreparedSet set = prepare_set(one, model.reference_size, model.maxima);
  const auto outputs = predict_set(model, set, 1);
  json steps = json::array();
  for (std::size_t t = 0; t < series.steps.size(); ++t) {
    const ModelOutput& o = outputs[0][t];
    const BetaMoments m = beta_moments(o.alpha, o.beta);
    const SelectionResult sel = score_and_select(m, gamma, rho);
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json step = {{"t", t},
                 {"alpha", vec(o.alpha)},
                 {"beta", vec(o.beta)},
                 {"mu", vec(m.mean)},
                 {"sigma", vec(m.stddev)},
                 {"score", vec(sel.scores)},
                 {"selected", sel.selected},
                 {"fixed_values", vec(sel.fixed_values)}};
    json solution = nullptr;
    try {
      const auto report =
          reduce_and_solve(series.steps[t], sel, backend, series.id + "_t" + std::to_string(t));
      if (report) {
        solution = {{"status", std::string(to_string(report->status))},
                    {"objective", report->objective},
                    {"z", vec(report->assignment)}};
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooManyBinaries) throw;
      step["note"] = e.what();
    }
    step["solution"] = solution;
    steps.push_back(std::move(step));
  }
  return {{"series", series.id}, {"rho", rho}, {"gamma", gamma}, {"steps", steps}};
}

json cmd_predict(const fs::path& checkpoint, const fs::path& instance_file, double rho, double gamma,
                 const SolveBackend& backend, const fs::path& output) {
  LoadedModel model = load_model(checkpoint);
  std::vector<InstanceSeries> series;
  if (instance_file.extension() == ".mps") {
    InstanceSeries s;
    s.id = instance_file.stem().string();
    s.steps.push_back(read_mps(instance_file));
    s.labels.resize(1);
    series.push_back(std::move(s));
  } else {
    series = read_split(instance_file);
  }
  json out = json::array();
  for (const auto& s : series) out.push_back(predict_series(model, s, rho, gamma, backend));
  if (!output.empty()) {
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    std::ofstream f(output);
    if (!f) fail(ErrorCode::IoFailure, "cannot write " + output.string());
    f << out.dump(2) << '\n';
  }
  return out;
}

}  // namespace milpfix
