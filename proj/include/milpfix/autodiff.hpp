// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Node ids grow in
// creation order, which is a topological order, so `backward` is a single
// reverse sweep. Trainable tensors live in a ParameterStore; tape leaves that
// reference them forward their adjoints into the store's gradient slots.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "milpfix/error.hpp"

namespace milpfix::ad {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double item() const;

  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
  };

  /// Throws ConfigError on a duplicate name.
  Index add(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Index index(const std::string& name) const;
  Entry& operator[](Index i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& operator[](Index i) const { return entries_[static_cast<std::size_t>(i)]; }
  Entry& at(const std::string& name) { return (*this)[index(name)]; }
  const Entry& at(const std::string& name) const { return (*this)[index(name)]; }
  Index size() const { return static_cast<Index>(entries_.size()); }
  Index num_scalars() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  double grad_norm() const;

  /// Optimizer steps applied so far (drives Adam's bias correction).
  std::int64_t step = 0;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, Index> index_;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor parameter(ParameterStore& store, Index index);
  Tensor parameter(ParameterStore& store, const std::string& name) { return parameter(store, store.index(name)); }

  /// Appends a node. Raises NonFiniteValue naming `op` if the value holds a
  /// NaN or infinity. The backward closure is dropped when no parent needs a
  /// gradient.
  Tensor record(std::string_view op, Matrix value, std::initializer_list<Tensor> parents, Backward backward);
  Tensor record(std::string_view op, Matrix value, const std::vector<Tensor>& parents, Backward backward);

  bool requires_grad(const Tensor& t) const { return node(t.id()).requires_grad; }
  /// Adds `g` into the adjoint of `t` (no-op for constants).
  void accumulate(const Tensor& t, const Eigen::Ref<const Matrix>& g);

  /// Reverse sweep from a 1×1 loss. Adjoints add into the store gradients,
  /// so two calls without `zero_grad` double them.
  void backward(const Tensor& loss);

  const Matrix& value(int id) const { return node(id).value; }
  const Matrix& grad(int id) const { return node(id).grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    ParameterStore* store = nullptr;
    Index param = -1;
  };

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  Tensor push(Node n);

  std::deque<Node> nodes_;  // deque keeps references to values stable
};

// ---------------------------------------------------------------------------
// Operations. Binary elementwise ops accept equal shapes, a 1×cols row that
// broadcasts over rows, or a 1×1 scalar.

enum class Axis { Rows, Cols };

Tensor matmul(const Tensor& a, const Tensor& b);
/// Constant sparse × dense; the adjoint only touches the sparsity pattern.
Tensor spmm(std::shared_ptr<const SparseMatrix> s, const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor shift(const Tensor& a, double k);
/// Elementwise product with a constant of the same shape.
Tensor mul_const(const Tensor& a, const Matrix& k);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor gather_rows(const Tensor& a, std::shared_ptr<const std::vector<Index>> rows);

Tensor sum(const Tensor& a);
/// Axis::Rows reduces over rows (→ 1×cols); Axis::Cols over columns (→ rows×1).
Tensor sum(const Tensor& a, Axis axis);
Tensor mean(const Tensor& a, Axis axis);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
/// log(max(x, 1e-12)); zero adjoint inside the clamped region.
Tensor log(const Tensor& a);
/// sqrt(max(x, 1e-12)); zero adjoint inside the clamped region.
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
/// log B(α, β) = lgamma α + lgamma β − lgamma(α+β), elementwise.
Tensor log_beta(const Tensor& alpha, const Tensor& beta);

/// Row-wise layer normalization with learnable 1×d gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

}  // namespace milpfix::ad
