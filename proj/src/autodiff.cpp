// SPDX-License-Identifier: Apache-2.0
#include "milpfix/autodiff.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>

namespace milpfix::ad {

const Matrix& Tensor::value() const { return tape_->value(id_); }
const Matrix& Tensor::grad() const { return tape_->grad(id_); }

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) fail(ErrorCode::NotScalar, "item() on a " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + " tensor");
  return v(0, 0);
}

Index ParameterStore::add(const std::string& name, Matrix init) {
  if (contains(name)) fail(ErrorCode::ConfigError, "duplicate parameter name '" + name + "'");
  const Index i = size();
  Entry e;
  e.name = name;
  e.grad = Matrix::Zero(init.rows(), init.cols());
  e.first_moment = Matrix::Zero(init.rows(), init.cols());
  e.second_moment = Matrix::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  index_.emplace(name, i);
  return i;
}

Index ParameterStore::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::ConfigError, "unknown parameter '" + name + "'");
  return it->second;
}

Index ParameterStore::num_scalars() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.grad.squaredNorm();
  return std::sqrt(s);
}

Tensor Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Tape::parameter(ParameterStore& store, Index index) {
  Node n;
  n.value = store[index].value;
  n.requires_grad = true;
  n.store = &store;
  n.param = index;
  return push(std::move(n));
}

Tensor Tape::record(std::string_view op, Matrix value, std::initializer_list<Tensor> parents, Backward backward) {
  return record(op, std::move(value), std::vector<Tensor>(parents), std::move(backward));
}

Tensor Tape::record(std::string_view op, Matrix value, const std::vector<Tensor>& parents, Backward backward) {
  if (!value.allFinite()) fail(ErrorCode::NonFiniteValue, "operation '" + std::string(op) + "' produced NaN/Inf");
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (p.tape() != this) fail(ErrorCode::ShapeMismatch, "operation '" + std::string(op) + "' mixes tapes");
    n.requires_grad = n.requires_grad || node(p.id()).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Tensor& t, const Eigen::Ref<const Matrix>& g) {
  Node& n = node(t.id());
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) fail(ErrorCode::ShapeMismatch, "loss belongs to another tape");
  if (loss.value().size() != 1) fail(ErrorCode::NotScalar, "backward needs a 1x1 loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  Node& root = node(loss.id());
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.grad.size() == 0) continue;
    if (n.store != nullptr) {
      (*n.store)[n.param].grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(std::string_view op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.size() == 1) return Broadcast::Scalar;
  fail(ErrorCode::ShapeMismatch, std::string(op) + ": cannot broadcast " + std::to_string(b.rows()) + "x" +
                                     std::to_string(b.cols()) + " onto " + std::to_string(a.rows()) + "x" +
                                     std::to_string(a.cols()));
}

Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::Same: return b;
    case Broadcast::Row: return b.replicate(rows, 1);
    case Broadcast::Scalar: return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same: return g;
    case Broadcast::Row: return g.colwise().sum();
    case Broadcast::Scalar: return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

Tape& tape_of(const Tensor& a) {
  if (!a.valid()) fail(ErrorCode::ShapeMismatch, "operation on an empty tensor");
  return *a.tape();
}

template <typename Forward, typename Derivative>
Tensor unary(std::string_view op, const Tensor& a, Forward f, Derivative df) {
  Matrix out = f(a.value());
  return tape_of(a).record(op, std::move(out), {a}, [a, df](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(df(a.value())));
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                                       std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out = a.value() * b.value();
  return tape_of(a).record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Tensor spmm(std::shared_ptr<const SparseMatrix> s, const Tensor& x) {
  if (s->cols() != x.rows()) fail(ErrorCode::ShapeMismatch, "spmm: sparse columns do not match dense rows");
  Matrix out = (*s) * x.value();
  return tape_of(x).record("spmm", std::move(out), {x}, [s, x](Tape& t, const Matrix& g) {
    t.accumulate(x, s->transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("add", a.value(), b.value());
  Matrix out = a.value() + expand(b.value(), k, a.rows(), a.cols());
  return tape_of(a).record("add", std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, reduce(g, k));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("sub", a.value(), b.value());
  Matrix out = a.value() - expand(b.value(), k, a.rows(), a.cols());
  return tape_of(a).record("sub", std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -reduce(g, k));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("mul", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(expand(b.value(), k, a.rows(), a.cols()));
  return tape_of(a).record("mul", std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
    const Matrix bb = expand(b.value(), k, a.rows(), a.cols());
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(bb));
    if (t.requires_grad(b)) t.accumulate(b, reduce(g.cwiseProduct(a.value()), k));
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("div", a.value(), b.value());
  const Matrix bb = expand(b.value(), k, a.rows(), a.cols());
  Matrix out = a.value().cwiseQuotient(bb);
  return tape_of(a).record("div", std::move(out), {a, b}, [a, b, k](Tape& t, const Matrix& g) {
    const Matrix bb = expand(b.value(), k, a.rows(), a.cols());
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseQuotient(bb));
    if (t.requires_grad(b)) {
      const Matrix d = -(g.array() * a.value().array() / bb.array().square()).matrix();
      t.accumulate(b, reduce(d, k));
    }
  });
}

Tensor scale(const Tensor& a, double k) {
  return tape_of(a).record("scale", a.value() * k, {a}, [a, k](Tape& t, const Matrix& g) { t.accumulate(a, g * k); });
}

Tensor shift(const Tensor& a, double k) {
  Matrix out = a.value().array() + k;
  return tape_of(a).record("shift", std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Tensor mul_const(const Tensor& a, const Matrix& k) {
  if (k.rows() != a.rows() || k.cols() != a.cols()) fail(ErrorCode::ShapeMismatch, "mul_const: shape mismatch");
  Matrix out = a.value().cwiseProduct(k);
  return tape_of(a).record("mul_const", std::move(out), {a}, [a, k](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(k));
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) fail(ErrorCode::ShapeMismatch, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return tape_of(parts.front()).record("concat_cols", std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index at = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) fail(ErrorCode::ShapeMismatch, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return tape_of(parts.front()).record("concat_rows", std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index at = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) fail(ErrorCode::ShapeMismatch, "slice_cols out of range");
  Matrix out = a.value().middleCols(start, count);
  return tape_of(a).record("slice_cols", std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) fail(ErrorCode::ShapeMismatch, "slice_rows out of range");
  Matrix out = a.value().middleRows(start, count);
  return tape_of(a).record("slice_rows", std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Tensor gather_rows(const Tensor& a, std::shared_ptr<const std::vector<Index>> rows) {
  Matrix out(static_cast<Index>(rows->size()), a.cols());
  for (std::size_t k = 0; k < rows->size(); ++k) {
    const Index r = (*rows)[k];
    if (r < 0 || r >= a.rows()) fail(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    out.row(static_cast<Index>(k)) = a.value().row(r);
  }
  return tape_of(a).record("gather_rows", std::move(out), {a}, [a, rows](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < rows->size(); ++k) full.row((*rows)[k]) += g.row(static_cast<Index>(k));
    t.accumulate(a, full);
  });
}

Tensor sum(const Tensor& a) {
  return tape_of(a).record("sum", Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor sum(const Tensor& a, Axis axis) {
  Matrix out = axis == Axis::Rows ? Matrix(a.value().colwise().sum()) : Matrix(a.value().rowwise().sum());
  return tape_of(a).record("sum_axis", std::move(out), {a}, [a, axis](Tape& t, const Matrix& g) {
    t.accumulate(a, axis == Axis::Rows ? Matrix(g.replicate(a.rows(), 1)) : Matrix(g.replicate(1, a.cols())));
  });
}

Tensor mean(const Tensor& a, Axis axis) {
  const Index n = axis == Axis::Rows ? a.rows() : a.cols();
  if (n == 0) fail(ErrorCode::ShapeMismatch, "mean over an empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const int id = a.tape()->size();  // id of the node about to be recorded
  return tape_of(a).record("sigmoid", std::move(out), {a}, [a, id](Tape& t, const Matrix& g) {
    const auto s = t.value(id).array();
    t.accumulate(a, (g.array() * s * (1.0 - s)).matrix());
  });
}

Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh().matrix();
  const int id = a.tape()->size();
  return tape_of(a).record("tanh", std::move(out), {a}, [a, id](Tape& t, const Matrix& g) {
    const auto y = t.value(id).array();
    t.accumulate(a, (g.array() * (1.0 - y.square())).matrix());
  });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](const Matrix& x) { return Matrix(x.cwiseMax(0.0)); },
      [](const Matrix& x) { return Matrix((x.array() > 0.0).cast<double>()); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a,
      [](const Matrix& x) { return Matrix((x.array().max(0.0) + (-x.array().abs()).exp().log1p()).matrix()); },
      [](const Matrix& x) { return Matrix((1.0 / (1.0 + (-x.array()).exp())).matrix()); });
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp().matrix();
  const int id = a.tape()->size();
  return tape_of(a).record("exp", std::move(out), {a}, [a, id](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.value(id)));
  });
}

namespace {
constexpr double kClampFloor = 1e-12;
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](const Matrix& x) { return Matrix(x.array().max(kClampFloor).log().matrix()); },
      [](const Matrix& x) { return Matrix((x.array() > kClampFloor).select(1.0 / x.array(), 0.0).matrix()); });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      "sqrt", a, [](const Matrix& x) { return Matrix(x.array().max(kClampFloor).sqrt().matrix()); },
      [](const Matrix& x) {
        return Matrix((x.array() > kClampFloor).select(0.5 / x.array().max(kClampFloor).sqrt(), 0.0).matrix());
      });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](const Matrix& x) { return Matrix(x.array().square().matrix()); },
      [](const Matrix& x) { return Matrix(2.0 * x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](const Matrix& x) { return Matrix(x.cwiseMax(lo).cwiseMin(hi)); },
      [lo, hi](const Matrix& x) { return Matrix(((x.array() >= lo) && (x.array() <= hi)).cast<double>().matrix()); });
}

Tensor log_beta(const Tensor& alpha, const Tensor& beta) {
  if (alpha.rows() != beta.rows() || alpha.cols() != beta.cols()) fail(ErrorCode::ShapeMismatch, "log_beta shapes differ");
  const auto a = alpha.value().array();
  const auto b = beta.value().array();
  Matrix out = (a.lgamma() + b.lgamma() - (a + b).lgamma()).matrix();
  return tape_of(alpha).record("log_beta", std::move(out), {alpha, beta}, [alpha, beta](Tape& t, const Matrix& g) {
    const auto a = alpha.value().array();
    const auto b = beta.value().array();
    const Eigen::ArrayXXd common = (a + b).digamma();
    if (t.requires_grad(alpha)) t.accumulate(alpha, (g.array() * (a.digamma() - common)).matrix());
    if (t.requires_grad(beta)) t.accumulate(beta, (g.array() * (b.digamma() - common)).matrix());
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    fail(ErrorCode::ShapeMismatch, "layer_norm: gain/bias must be 1x" + std::to_string(d));
  }
  const Matrix& v = x.value();
  const Eigen::VectorXd mu = v.rowwise().mean();
  const Matrix centered = v.colwise() - mu;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(d)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return tape_of(x).record(
      "layer_norm", std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv_std, d](Tape& t, const Matrix& g) {
        if (t.requires_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (t.requires_grad(x)) {
          const Matrix gx = g.array().rowwise() * gain.value().row(0).array();
          const Eigen::VectorXd m1 = gx.rowwise().mean();
          const Eigen::VectorXd m2 = gx.cwiseProduct(xhat).rowwise().mean();
          Matrix dx = gx.colwise() - m1;
          dx -= xhat.array().colwise().operator*(m2.array()).matrix();
          dx = dx.array().colwise() * inv_std.array();
          t.accumulate(x, dx);
        }
        (void)d;
      });
}

}  // namespace milpfix::ad
