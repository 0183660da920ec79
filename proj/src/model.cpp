// SPDX-License-Identifier: Apache-2.0
#include "milpfix/model.hpp"

#include <random>
#include <set>

#include "milpfix/graph.hpp"

namespace milpfix {

using ad::Tape;
using ad::Tensor;

void ModelConfig::validate() const {
  if (feature_dim <= 0) fail(ErrorCode::ConfigError, "model.feature_dim must be positive");
  if (gcn_widths.empty()) fail(ErrorCode::ConfigError, "model.gcn_widths needs at least one layer");
  for (Index w : gcn_widths) {
    if (w <= 0) fail(ErrorCode::ConfigError, "model.gcn_widths entries must be positive");
  }
  if (lstm_width <= 0 || lstm_layers <= 0) fail(ErrorCode::ConfigError, "model LSTM width and layers must be positive");
}

nlohmann::json to_json(const ModelConfig& config) {
  return {{"feature_dim", config.feature_dim}, {"gcn_widths", config.gcn_widths},
          {"lstm_width", config.lstm_width},   {"lstm_layers", config.lstm_layers},
          {"feature_relu", config.feature_relu}, {"gcn_relu", config.gcn_relu},
          {"layer_norm", config.layer_norm},   {"seed", config.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"feature_dim", "gcn_widths", "lstm_width", "lstm_layers",
                                           "feature_relu", "gcn_relu",   "layer_norm", "seed"};
  if (!j.is_object()) fail(ErrorCode::ConfigError, "model section must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorCode::ConfigError, "unknown key model." + key);
  }
  ModelConfig c;
  try {
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.gcn_widths = j.value("gcn_widths", c.gcn_widths);
    c.lstm_width = j.value("lstm_width", c.lstm_width);
    c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
    c.feature_relu = j.value("feature_relu", c.feature_relu);
    c.gcn_relu = j.value("gcn_relu", c.gcn_relu);
    c.layer_norm = j.value("layer_norm", c.layer_norm);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("model section: ") + e.what());
  }
  c.validate();
  return c;
}

PreparedInstance prepare_instance(const MilpInstance& raw, const TripletMaxima& maxima, Index reference_size) {
  PreparedInstance p;
  p.normalized = reference_size > 0 ? normalize_rescaled(raw, reference_size) : normalize(raw);
  p.triplets = build_triplets(p.normalized, maxima);
  p.adjacency = std::make_shared<const SparseMatrix>(normalized_adjacency(build_bipartite_graph(p.normalized)));
  return p;
}

std::vector<PreparedInstance> prepare_series(const InstanceSeries& series, const TripletMaxima& maxima,
                                             Index reference_size) {
  std::vector<PreparedInstance> out;
  out.reserve(series.steps.size());
  for (const auto& step : series.steps) out.push_back(prepare_instance(step, maxima, reference_size));
  return out;
}

ad::ParameterStore init_parameters(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ad::ParameterStore store;
  auto glorot = [&](const std::string& name, Index fan_in, Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (Index k = 0; k < w.size(); ++k) w(k) = u(rng);
    store.add(name, std::move(w));
  };
  auto zeros = [&](const std::string& name, Index cols) { store.add(name, Matrix::Zero(1, cols)); };

  const Index du = config.feature_dim;
  for (const std::string kind : {"var", "con"}) {
    glorot("embed/" + kind + "/W", 3, du);
    zeros("embed/" + kind + "/b", du);
  }
  Index in = du;
  for (std::size_t l = 0; l < config.gcn_widths.size(); ++l) {
    const Index w = config.gcn_widths[l];
    const std::string p = "gcn/" + std::to_string(l) + "/";
    glorot(p + "W", in, w);
    zeros(p + "b", w);
    store.add(p + "ln_gain", Matrix::Ones(1, w));
    zeros(p + "ln_bias", w);
    in = w + du;
  }
  const Index dx = config.embedding_dim();
  const Index hw = config.lstm_width;
  for (Index l = 0; l < config.lstm_layers; ++l) {
    const std::string p = "lstm/" + std::to_string(l) + "/";
    glorot(p + "Wx", l == 0 ? dx : hw, 4 * hw);
    glorot(p + "Wh", hw, 4 * hw);
    Matrix b = Matrix::Zero(1, 4 * hw);
    b.middleCols(hw, hw).setOnes();
    store.add(p + "b", std::move(b));
  }
  glorot("head/binary/W", dx + hw, 2);
  zeros("head/binary/b", 2);
  glorot("head/continuous/W", dx + hw, 1);
  zeros("head/continuous/b", 1);
  return store;
}

LstmState zero_state(Tape& tape, const ModelConfig& config, Index rows) {
  LstmState s;
  for (Index l = 0; l < config.lstm_layers; ++l) {
    s.h.push_back(tape.constant(Matrix::Zero(rows, config.lstm_width)));
    s.c.push_back(tape.constant(Matrix::Zero(rows, config.lstm_width)));
  }
  return s;
}

SparseMatrix triplet_aggregator(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
  const Index nodes = mask.rows();
  const Index width = mask.cols();
  std::vector<Triplet> entries;
  for (Index j = 0; j < nodes; ++j) {
    const Index count = mask.row(j).count();
    if (count == 0) continue;
    for (Index k = 0; k < width; ++k) {
      if (mask(j, k)) entries.emplace_back(j, j * width + k, 1.0 / static_cast<double>(count));
    }
  }
  return make_sparse(nodes, nodes * width, entries);
}

Tensor embed_features(Tape& tape, ad::ParameterStore& store, const ModelConfig& config, const std::string& kind,
                      const Matrix& triplets, std::shared_ptr<const SparseMatrix> aggregate) {
  if (triplets.cols() != 3 || aggregate->cols() != triplets.rows()) {
    fail(ErrorCode::ShapeMismatch, "embed_features: triplet block and aggregator disagree");
  }
  Tensor mapped = add(matmul(tape.constant(triplets), tape.parameter(store, "embed/" + kind + "/W")),
                      tape.parameter(store, "embed/" + kind + "/b"));
  if (config.feature_relu) mapped = relu(mapped);
  return spmm(std::move(aggregate), mapped);
}

Tensor gcn_forward(Tape& tape, ad::ParameterStore& store, const ModelConfig& config, const Tensor& U,
                   std::shared_ptr<const SparseMatrix> adjacency) {
  Tensor x = U;
  for (std::size_t l = 0; l < config.gcn_widths.size(); ++l) {
    const std::string p = "gcn/" + std::to_string(l) + "/";
    const Tensor in = l == 0 ? U : ad::concat_cols({x, U});
    x = add(spmm(adjacency, matmul(in, tape.parameter(store, p + "W"))), tape.parameter(store, p + "b"));
    if (config.layer_norm) x = layer_norm(x, tape.parameter(store, p + "ln_gain"), tape.parameter(store, p + "ln_bias"));
    if (config.gcn_relu) x = relu(x);
  }
  return x;
}

LstmState lstm_step(Tape& tape, ad::ParameterStore& store, const ModelConfig& config, const LstmState& state,
                    const Tensor& x) {
  const Index hw = config.lstm_width;
  LstmState next;
  Tensor input = x;
  for (Index l = 0; l < config.lstm_layers; ++l) {
    const std::string p = "lstm/" + std::to_string(l) + "/";
    const Tensor& h = state.h[static_cast<std::size_t>(l)];
    const Tensor& c = state.c[static_cast<std::size_t>(l)];
    if (h.rows() != input.rows()) fail(ErrorCode::ShapeMismatch, "lstm_step: state and input row counts differ");
    const Tensor gates = add(add(matmul(input, tape.parameter(store, p + "Wx")), matmul(h, tape.parameter(store, p + "Wh"))),
                             tape.parameter(store, p + "b"));
    const Tensor i = sigmoid(slice_cols(gates, 0, hw));
    const Tensor f = sigmoid(slice_cols(gates, hw, hw));
    const Tensor g = tanh(slice_cols(gates, 2 * hw, hw));
    const Tensor o = sigmoid(slice_cols(gates, 3 * hw, hw));
    const Tensor c_next = add(mul(f, c), mul(i, g));
    const Tensor h_next = mul(o, tanh(c_next));
    next.h.push_back(h_next);
    next.c.push_back(c_next);
    input = h_next;
  }
  return next;
}

HeadOutput project_heads(Tape& tape, ad::ParameterStore& store, const Tensor& x, const Tensor& h) {
  const Tensor in = ad::concat_cols({x, h});
  const Tensor raw = add(matmul(in, tape.parameter(store, "head/binary/W")), tape.parameter(store, "head/binary/b"));
  HeadOutput out;
  out.alpha = shift(softplus(slice_cols(raw, 0, 1)), 1.0);
  out.beta = shift(softplus(slice_cols(raw, 1, 1)), 1.0);
  out.continuous = add(matmul(in, tape.parameter(store, "head/continuous/W")), tape.parameter(store, "head/continuous/b"));
  return out;
}

namespace {

struct BatchShape {
  Index num_series = 0;
  Index length = 0;
  Index total_vars = 0;
  Index total_cons = 0;
  std::vector<InstanceSlot> slots;
  std::vector<Index> con_offset;
};

BatchShape batch_shape(const std::vector<const std::vector<PreparedInstance>*>& series) {
  if (series.empty()) fail(ErrorCode::EmptyDataset, "empty batch");
  BatchShape shape;
  shape.num_series = static_cast<Index>(series.size());
  shape.length = static_cast<Index>(series.front()->size());
  if (shape.length == 0) fail(ErrorCode::EmptyDataset, "series without timesteps");
  const TripletMaxima& maxima = series.front()->front().triplets.maxima;
  for (const auto* s : series) {
    if (static_cast<Index>(s->size()) != shape.length) fail(ErrorCode::ShapeMismatch, "batch series lengths differ");
    for (const auto& p : *s) {
      if (p.normalized.num_binary != s->front().normalized.num_binary ||
          p.normalized.num_continuous != s->front().normalized.num_continuous ||
          p.normalized.num_rows() != s->front().normalized.num_rows()) {
        fail(ErrorCode::ShapeMismatch, "instance sizes change across timesteps of one series");
      }
      if (p.triplets.maxima.max_cons_per_var != maxima.max_cons_per_var ||
          p.triplets.maxima.max_vars_per_con != maxima.max_vars_per_con) {
        fail(ErrorCode::ShapeMismatch, "batch mixes triplet maxima");
      }
    }
  }
  Index binary = 0;
  Index continuous = 0;
  for (Index t = 0; t < shape.length; ++t) {
    for (Index s = 0; s < shape.num_series; ++s) {
      const MilpInstance& inst = (*series[static_cast<std::size_t>(s)])[static_cast<std::size_t>(t)].normalized;
      InstanceSlot slot{s, t, shape.total_vars, binary, continuous, inst.num_binary, inst.num_continuous};
      shape.slots.push_back(slot);
      shape.con_offset.push_back(shape.total_cons);
      shape.total_vars += inst.num_vars();
      shape.total_cons += inst.num_rows();
      binary += inst.num_binary;
      continuous += inst.num_continuous;
    }
  }
  return shape;
}

const PreparedInstance& at(const std::vector<const std::vector<PreparedInstance>*>& series, const InstanceSlot& slot) {
  return (*series[static_cast<std::size_t>(slot.series)])[static_cast<std::size_t>(slot.t)];
}

}  // namespace

BatchOutput forward_batch(Tape& tape, ad::ParameterStore& store, const ModelConfig& config,
                          const std::vector<const std::vector<PreparedInstance>*>& series) {
  const BatchShape shape = batch_shape(series);
  const TripletMaxima maxima = series.front()->front().triplets.maxima;
  const Index mc = maxima.max_cons_per_var;
  const Index mv = maxima.max_vars_per_con;
  const Index nv = shape.total_vars;
  const Index nc = shape.total_cons;

  Matrix var_triplets(nv * mc, 3);
  Matrix con_triplets(nc * mv, 3);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> var_mask(nv, mc);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> con_mask(nc, mv);
  std::vector<Triplet> adj;
  for (std::size_t k = 0; k < shape.slots.size(); ++k) {
    const InstanceSlot& slot = shape.slots[k];
    const PreparedInstance& p = at(series, slot);
    const Index vars = p.normalized.num_vars();
    const Index cons = p.normalized.num_rows();
    const Index coff = shape.con_offset[k];
    var_triplets.middleRows(slot.var_offset * mc, vars * mc) = p.triplets.var_triplets;
    con_triplets.middleRows(coff * mv, cons * mv) = p.triplets.con_triplets;
    var_mask.middleRows(slot.var_offset, vars) = p.triplets.var_mask;
    con_mask.middleRows(coff, cons) = p.triplets.con_mask;
    auto global = [&](Index u) { return u < vars ? slot.var_offset + u : nv + coff + (u - vars); };
    for (Index r = 0; r < p.adjacency->outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(*p.adjacency, r); it; ++it) adj.emplace_back(global(r), global(it.col()), it.value());
    }
  }
  auto adjacency = std::make_shared<const SparseMatrix>(make_sparse(nv + nc, nv + nc, adj));
  const Tensor u_var = embed_features(tape, store, config, "var", var_triplets,
                                      std::make_shared<const SparseMatrix>(triplet_aggregator(var_mask)));
  const Tensor u_con = embed_features(tape, store, config, "con", con_triplets,
                                      std::make_shared<const SparseMatrix>(triplet_aggregator(con_mask)));
  const Tensor x = gcn_forward(tape, store, config, ad::concat_rows({u_var, u_con}), adjacency);
  const Tensor x_var = slice_rows(x, 0, nv);

  const Index rows_per_t = nv / shape.length;
  LstmState state = zero_state(tape, config, rows_per_t);
  std::vector<Tensor> hidden;
  for (Index t = 0; t < shape.length; ++t) {
    state = lstm_step(tape, store, config, state, slice_rows(x_var, t * rows_per_t, rows_per_t));
    hidden.push_back(state.h.back());
  }

  BatchOutput out;
  out.hidden = ad::concat_rows(hidden);
  out.all = project_heads(tape, store, x_var, out.hidden);
  out.final_state = state;
  out.slots = shape.slots;
  out.num_series = shape.num_series;
  out.length = shape.length;
  auto binary_rows = std::make_shared<std::vector<Index>>();
  auto continuous_rows = std::make_shared<std::vector<Index>>();
  for (const auto& slot : shape.slots) {
    for (Index j = 0; j < slot.num_binary; ++j) binary_rows->push_back(slot.var_offset + j);
    for (Index j = 0; j < slot.num_continuous; ++j) continuous_rows->push_back(slot.var_offset + slot.num_binary + j);
  }
  out.alpha = gather_rows(out.all.alpha, binary_rows);
  out.beta = gather_rows(out.all.beta, binary_rows);
  out.continuous = gather_rows(out.all.continuous, continuous_rows);
  return out;
}

StackedSystem stack_systems(const std::vector<const std::vector<PreparedInstance>*>& series) {
  const BatchShape shape = batch_shape(series);
  std::vector<Triplet> entries;
  StackedSystem sys;
  sys.b.resize(shape.total_cons);
  sys.c.resize(shape.total_vars);
  sys.binary_mask = Vector::Zero(shape.total_vars);
  for (std::size_t k = 0; k < shape.slots.size(); ++k) {
    const InstanceSlot& slot = shape.slots[k];
    const MilpInstance& inst = at(series, slot).normalized;
    const Index coff = shape.con_offset[k];
    for (Index i = 0; i < inst.num_rows(); ++i) {
      for (SparseMatrix::InnerIterator it(inst.A, i); it; ++it) entries.emplace_back(coff + i, slot.var_offset + it.col(), it.value());
    }
    sys.b.segment(coff, inst.num_rows()) = inst.b;
    sys.c.segment(slot.var_offset, inst.num_vars()) = inst.c;
    sys.binary_mask.segment(slot.var_offset, inst.num_binary).setOnes();
  }
  sys.A = std::make_shared<const SparseMatrix>(make_sparse(shape.total_cons, shape.total_vars, entries));
  return sys;
}

std::vector<ModelOutput> forward_series(ad::ParameterStore& store, const ModelConfig& config,
                                        const std::vector<PreparedInstance>& series) {
  Tape tape;
  const BatchOutput batch = forward_batch(tape, store, config, {&series});
  std::vector<ModelOutput> out;
  const Matrix& a = batch.alpha.value();
  const Matrix& b = batch.beta.value();
  const Matrix& zc = batch.continuous.value();
  for (const auto& slot : batch.slots) {
    ModelOutput o;
    o.alpha = a.col(0).segment(slot.binary_offset, slot.num_binary);
    o.beta = b.col(0).segment(slot.binary_offset, slot.num_binary);
    o.continuous = zc.col(0).segment(slot.continuous_offset, slot.num_continuous);
    o.hidden = batch.hidden.value().middleRows(slot.var_offset, slot.num_binary + slot.num_continuous);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace milpfix
