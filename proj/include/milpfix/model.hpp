// SPDX-License-Identifier: Apache-2.0
//
// Triplet embedding → GCN → per-node LSTM → Beta / continuous heads.
//
// A batch stacks every (series, timestep) instance into one block-diagonal
// graph ordered timestep-major, so all rows belonging to timestep t form one
// contiguous block with an identical layout for every t. The LSTM then runs
// over those blocks in order.
#pragma once

#include <memory>
#include <vector>

#include "json.hpp"

#include "milpfix/autodiff.hpp"
#include "milpfix/features.hpp"
#include "milpfix/milp.hpp"

namespace milpfix {

struct ModelConfig {
  Index feature_dim = 16;
  std::vector<Index> gcn_widths{16, 16};
  Index lstm_width = 32;
  Index lstm_layers = 1;
  bool feature_relu = true;
  bool gcn_relu = true;
  bool layer_norm = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on empty or non-positive sizes.
  void validate() const;
  Index embedding_dim() const { return gcn_widths.back(); }
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Everything the network needs from one instance, computed once.
struct PreparedInstance {
  MilpInstance normalized;
  NodeTriplets triplets;
  std::shared_ptr<const SparseMatrix> adjacency;  // D^{-1/2} A_adj D^{-1/2}
};

/// Normalizes (rescaled to `reference_size` variables when it is > 0),
/// builds triplets against `maxima` and the normalized adjacency.
PreparedInstance prepare_instance(const MilpInstance& raw, const TripletMaxima& maxima, Index reference_size = 0);
std::vector<PreparedInstance> prepare_series(const InstanceSeries& series, const TripletMaxima& maxima,
                                             Index reference_size = 0);

/// Glorot-uniform weights, zero biases, unit layer-norm gains and forget-gate
/// biases of 1.
ad::ParameterStore init_parameters(const ModelConfig& config);

struct LstmState {
  std::vector<ad::Tensor> h;  // one per layer, rows × width
  std::vector<ad::Tensor> c;
};

LstmState zero_state(ad::Tape& tape, const ModelConfig& config, Index rows);

/// Shared 3 → D_u map of every triplet, averaged over the unmasked triplets
/// of each node by the constant `aggregate` matrix (nodes × triplet rows).
ad::Tensor embed_features(ad::Tape& tape, ad::ParameterStore& store, const ModelConfig& config,
                          const std::string& kind, const Matrix& triplets,
                          std::shared_ptr<const SparseMatrix> aggregate);

/// Mean-over-mask aggregation matrix for a padded triplet block.
SparseMatrix triplet_aggregator(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);

/// X^(l+1) = ReLU(LayerNorm(Â [X^(l), X^(0)] W^(l) + b^(l))); layer 0 sees X^(0) only.
ad::Tensor gcn_forward(ad::Tape& tape, ad::ParameterStore& store, const ModelConfig& config, const ad::Tensor& U,
                       std::shared_ptr<const SparseMatrix> adjacency);

LstmState lstm_step(ad::Tape& tape, ad::ParameterStore& store, const ModelConfig& config, const LstmState& state,
                    const ad::Tensor& x);

struct HeadOutput {
  ad::Tensor alpha;       // rows × 1, ≥ 1
  ad::Tensor beta;        // rows × 1, ≥ 1
  ad::Tensor continuous;  // rows × 1
};

/// Per-node heads on [x_j, h_j]: α, β = 1 + softplus(raw), ẑ_c = affine.
HeadOutput project_heads(ad::Tape& tape, ad::ParameterStore& store, const ad::Tensor& x, const ad::Tensor& h);

/// Row positions of one instance inside a batch.
struct InstanceSlot {
  Index series = 0;
  Index t = 0;
  Index var_offset = 0;         // into the stacked variable rows
  Index binary_offset = 0;      // into BatchOutput::alpha / beta
  Index continuous_offset = 0;  // into BatchOutput::continuous
  Index num_binary = 0;
  Index num_continuous = 0;
};

struct BatchOutput {
  HeadOutput all;           // every variable row, timestep-major
  ad::Tensor alpha;         // binary rows only
  ad::Tensor beta;
  ad::Tensor continuous;    // continuous rows only; 0×1 when there are none
  ad::Tensor hidden;        // top LSTM layer output, aligned with `all`
  LstmState final_state;
  std::vector<InstanceSlot> slots;  // index = t · num_series + s
  Index num_series = 0;
  Index length = 0;
};

/// Forward pass over equal-length series. Throws ShapeMismatch when lengths
/// or per-series sizes disagree across timesteps.
BatchOutput forward_batch(ad::Tape& tape, ad::ParameterStore& store, const ModelConfig& config,
                          const std::vector<const std::vector<PreparedInstance>*>& series);

/// Block-diagonal stack of the normalized constraint systems in batch order,
/// aligned with `BatchOutput::all`.
struct StackedSystem {
  std::shared_ptr<const SparseMatrix> A;
  Vector b;
  Vector c;
  Vector binary_mask;  // 1 on binary variable rows
};

StackedSystem stack_systems(const std::vector<const std::vector<PreparedInstance>*>& series);

struct ModelOutput {
  Vector alpha;
  Vector beta;
  Vector continuous;
  Matrix hidden;  // final-layer LSTM output for this timestep
};

/// Inference over one series; LSTM state starts at zero.
std::vector<ModelOutput> forward_series(ad::ParameterStore& store, const ModelConfig& config,
                                        const std::vector<PreparedInstance>& series);

}  // namespace milpfix
