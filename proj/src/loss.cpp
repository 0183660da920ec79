// SPDX-License-Identifier: Apache-2.0
#include "milpfix/loss.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>

namespace milpfix {

namespace {

constexpr double kRateFloor = 1e-3;
constexpr int kMaxOrder = 512;

const QuadratureTable<double>& cached_table(int K) {
  static std::mutex mutex;
  static std::map<int, QuadratureTable<double>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(K);
  if (it == cache.end()) it = cache.emplace(K, cc_table<double>(K)).first;
  return it->second;
}

// e·log(x) with the convention x⁰ = 1 at x = 0.
double log_power(double e, double log_x) { return e == 0.0 ? 0.0 : e * log_x; }

struct MarginalTerms {
  double s = 0.0;        // ∫ I
  double s_alpha = 0.0;  // ∫ I · ∂ log I/∂α
  double s_beta = 0.0;
};

MarginalTerms marginal_terms(double a, double b, double z, const QuadratureTable<double>& table) {
  const double log_b = log_beta_function(a, b);
  const double psi_ab = Eigen::numext::digamma(a + b);
  const double psi_a = Eigen::numext::digamma(a);
  const double psi_b = Eigen::numext::digamma(b);
  MarginalTerms out;
  auto visit = [&](double w, double pi) {
    const double lp = pi > 0.0 ? std::log(pi) : -std::numeric_limits<double>::infinity();
    const double lq = pi < 1.0 ? std::log1p(-pi) : -std::numeric_limits<double>::infinity();
    const double value = std::exp(-log_b + log_power(a - 1.0 + z, lp) + log_power(b - z, lq));
    if (value == 0.0) return;
    // An endpoint with nonzero density has a zero exponent there; its log
    // factor is dropped.
    const double dlp = std::isfinite(lp) ? lp : 0.0;
    const double dlq = std::isfinite(lq) ? lq : 0.0;
    out.s += w * value;
    out.s_alpha += w * value * (dlp - psi_a + psi_ab);
    out.s_beta += w * value * (dlq - psi_b + psi_ab);
  };
  for (Index k = 0; k < table.weights.size(); ++k) {
    visit(table.weights(k), table.nodes(k));
    visit(table.weights(k), 1.0 - table.nodes(k));
  }
  return out;
}

void require_column(const ad::Tensor& t, Index rows, const char* what) {
  if (t.cols() != 1 || t.rows() != rows) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + " must be a " + std::to_string(rows) + "x1 column");
  }
}

}  // namespace

Vector class_rates(const std::vector<InstanceSeries>& series) {
  Vector ones;
  Index count = 0;
  for (const auto& s : series) {
    for (std::size_t t = 0; t < s.labels.size(); ++t) {
      const auto& label = s.labels[t];
      if (!label || label->status != SolveStatus::Optimal) continue;
      const Index nb = s.steps[t].num_binary;
      if (count == 0) {
        ones = Vector::Zero(nb);
      } else if (ones.size() != nb) {
        fail(ErrorCode::ShapeMismatch, "class rates need a fixed number of binaries across the dataset");
      }
      ones += label->z.head(nb);
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::EmptyDataset, "class rates need at least one labeled instance");
  return (ones / static_cast<double>(count)).cwiseMax(kRateFloor).cwiseMin(1.0 - kRateFloor);
}

Vector class_weights(const Vector& rates, const Vector& z) {
  if (rates.size() != z.size()) fail(ErrorCode::ShapeMismatch, "class_weights: rate and label sizes differ");
  Vector w(z.size());
  for (Index j = 0; j < z.size(); ++j) {
    w(j) = 1.0 / (std::pow(rates(j), z(j)) * std::pow(1.0 - rates(j), 1.0 - z(j)));
  }
  return w;
}

double unsupervised_loss(const MilpInstance& instance, const Vector& z_binary, const Vector& z_continuous,
                         double lambda_c) {
  if (z_binary.size() != instance.num_binary || z_continuous.size() != instance.num_continuous) {
    fail(ErrorCode::DimensionMismatch, "unsupervised_loss: assignment sizes do not match the instance");
  }
  Vector z(instance.num_vars());
  z << z_binary, z_continuous;
  const Vector excess = ((instance.A * z) - instance.b).cwiseMax(0.0);
  return instance.c.dot(z) + lambda_c * excess.squaredNorm();
}

double Schedule::value(std::int64_t step, std::int64_t total_steps) const {
  if (step < warmup_steps) {
    return warmup_initial + (warmup_final - warmup_initial) * static_cast<double>(step) /
                                static_cast<double>(warmup_steps);
  }
  const std::int64_t span = total_steps - 1 - warmup_steps;
  if (span <= 0) return final_value;
  const double frac = std::clamp(static_cast<double>(step - warmup_steps) / static_cast<double>(span), 0.0, 1.0);
  return warmup_final + (final_value - warmup_final) * frac;
}

LossValues schedule_values(const LossWeights& weights, std::int64_t step, std::int64_t total_steps) {
  return {weights.lambda.value(step, total_steps), weights.lambda_reg.value(step, total_steps),
          weights.lambda_c.value(step, total_steps)};
}

namespace ad {

Tensor beta_bernoulli_nll(const Tensor& alpha, const Tensor& beta, const Vector& z,
                          const QuadratureTable<double>& table) {
  const Index n = z.size();
  require_column(alpha, n, "alpha");
  require_column(beta, n, "beta");
  Matrix out(n, 1);
  Vector d_alpha(n);
  Vector d_beta(n);
  for (Index i = 0; i < n; ++i) {
    const double a = alpha.value()(i, 0);
    const double b = beta.value()(i, 0);
    MarginalTerms m = marginal_terms(a, b, z(i), table);
    for (int K = table.order * 2; !(m.s > 0.0) && K <= kMaxOrder; K *= 2) m = marginal_terms(a, b, z(i), cached_table(K));
    if (!(m.s > 0.0)) {
      fail(ErrorCode::NonFiniteValue, "beta_bernoulli_nll: quadrature sum is not positive at alpha=" +
                                          std::to_string(a) + " beta=" + std::to_string(b));
    }
    out(i, 0) = -std::log(m.s);
    d_alpha(i) = -m.s_alpha / m.s;
    d_beta(i) = -m.s_beta / m.s;
  }
  return alpha.tape()->record("beta_bernoulli_nll", std::move(out), {alpha, beta},
                              [alpha, beta, d_alpha, d_beta](Tape& t, const Matrix& g) {
                                if (t.requires_grad(alpha)) t.accumulate(alpha, g.cwiseProduct(d_alpha));
                                if (t.requires_grad(beta)) t.accumulate(beta, g.cwiseProduct(d_beta));
                              });
}

Tensor regularizer(const Tensor& alpha, const Tensor& beta, const Vector& z) {
  const Index n = z.size();
  require_column(alpha, n, "alpha");
  require_column(beta, n, "beta");
  const Eigen::ArrayXd a = alpha.value().col(0).array();
  const Eigen::ArrayXd b = beta.value().col(0).array();
  const Eigen::ArrayXd zz = z.array();
  const Eigen::ArrayXd s = a + b;
  const Eigen::ArrayXd f = ((1.0 - zz) * a + zz * b) / s;
  const Eigen::ArrayXd g = s - 2.0 + a.lgamma() + b.lgamma() - s.lgamma();
  const Eigen::ArrayXd psi_s = s.digamma();
  const Eigen::ArrayXd d_alpha = b * (1.0 - 2.0 * zz) / s.square() * g + f * (1.0 + a.digamma() - psi_s);
  const Eigen::ArrayXd d_beta = a * (2.0 * zz - 1.0) / s.square() * g + f * (1.0 + b.digamma() - psi_s);
  Matrix out = (f * g).matrix();
  return alpha.tape()->record("regularizer", std::move(out), {alpha, beta},
                              [alpha, beta, d_alpha, d_beta](Tape& t, const Matrix& grad) {
                                if (t.requires_grad(alpha)) t.accumulate(alpha, (grad.array() * d_alpha).matrix());
                                if (t.requires_grad(beta)) t.accumulate(beta, (grad.array() * d_beta).matrix());
                              });
}

Tensor soft_assignment(const Tensor& alpha, const Tensor& beta, const SoftAssignment& mode) {
  const Tensor mu = div(alpha, add(alpha, beta));
  if (!mode.sharpened) return sigmoid(mu);
  return sigmoid(scale(shift(mu, -0.5), mode.sharpness));
}

SupervisedTerms supervised_terms(const Tensor& alpha, const Tensor& beta, const SupervisedTargets& targets,
                                 const QuadratureTable<double>& table) {
  const Index n = targets.z.size();
  if (targets.mask.size() != n || targets.weight.size() != n) {
    fail(ErrorCode::ShapeMismatch, "supervised targets have inconsistent lengths");
  }
  Tape& tape = *alpha.tape();
  auto rows = std::make_shared<std::vector<Index>>();
  for (Index i = 0; i < n; ++i) {
    if (targets.mask(i) != 0.0) rows->push_back(i);
  }
  if (rows->empty()) {
    const Tensor zero = tape.constant(Matrix::Zero(1, 1));
    return {zero, zero};
  }
  const Index m = static_cast<Index>(rows->size());
  Vector z(m);
  Matrix w(m, 1);
  Matrix mask(m, 1);
  for (Index k = 0; k < m; ++k) {
    const Index i = (*rows)[static_cast<std::size_t>(k)];
    z(k) = targets.z(i);
    w(k, 0) = targets.mask(i) * targets.weight(i);
    mask(k, 0) = targets.mask(i);
  }
  const Tensor a = gather_rows(alpha, rows);
  const Tensor b = gather_rows(beta, rows);
  return {sum(mul_const(beta_bernoulli_nll(a, b, z, table), w)), sum(mul_const(regularizer(a, b, z), mask))};
}

UnsupervisedTerms unsupervised_terms(const Tensor& z_hat, const PenaltySystem& system) {
  const Index n = z_hat.rows();
  if (system.c.size() != n || system.A->cols() != n || system.A->rows() != system.b.size()) {
    fail(ErrorCode::ShapeMismatch, "unsupervised_terms: system does not match the assignment");
  }
  Tape& tape = *z_hat.tape();
  const Tensor objective = sum(mul_const(z_hat, system.c));
  if (system.b.size() == 0) return {objective, tape.constant(Matrix::Zero(1, 1))};
  const Tensor excess = relu(sub(spmm(system.A, z_hat), tape.constant(system.b)));
  return {objective, sum(square(excess))};
}

Tensor total_loss(const SupervisedTerms& sup, const UnsupervisedTerms& unsup, const LossValues& lambdas) {
  const Tensor supervised = add(sup.nll, scale(sup.reg, lambdas.lambda_reg));
  const Tensor unsupervised = add(unsup.objective, scale(unsup.penalty, lambdas.lambda_c));
  return add(supervised, scale(unsupervised, lambdas.lambda));
}

}  // namespace ad

}  // namespace milpfix
