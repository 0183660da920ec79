// SPDX-License-Identifier: Apache-2.0
//
// Semi-supervised loss stack: Clenshaw-Curtis marginal likelihood of a
// Beta-Bernoulli variable, a KL-style regularizer, class weighting, the
// constraint-penalty objective on soft assignments, and loss schedules.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "milpfix/autodiff.hpp"
#include "milpfix/milp.hpp"

namespace milpfix {

template <typename Scalar = double>
struct QuadratureTable {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  int order = 0;
  /// w = Dᵀd with the ½ Jacobian of [−1,1] → [0,1] folded in.
  Vec weights;
  /// π_k = (1 + cos(kπ/K)) / 2, k = 0..K/2. The mirrored nodes are 1 − π_k.
  Vec nodes;

  /// Σ_k w_k (f(π_k) + f(1 − π_k)) ≈ ∫₀¹ f.
  template <typename F>
  Scalar integrate(F&& f) const {
    Scalar acc = 0;
    for (Index k = 0; k < weights.size(); ++k) acc += weights(k) * (f(nodes(k)) + f(Scalar(1) - nodes(k)));
    return acc;
  }
};

/// Throws OddOrder unless K is even and at least 4.
template <typename Scalar = double>
QuadratureTable<Scalar> cc_table(int K = 64) {
  if (K < 4 || K % 2 != 0) fail(ErrorCode::OddOrder, "quadrature order must be even and >= 4, got " + std::to_string(K));
  using Vec = typename QuadratureTable<Scalar>::Vec;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int h = K / 2;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  Vec d(h + 1);
  d(0) = 1;
  for (int k = 1; k < h; ++k) d(k) = Scalar(2) / (Scalar(1) - Scalar(4 * k * k));
  d(h) = Scalar(1) / (Scalar(1) - Scalar(K) * Scalar(K));
  Mat D(h + 1, h + 1);
  for (int m = 0; m <= h; ++m) {
    for (int k = 0; k <= h; ++k) {
      const Scalar half = (k == 0 || k == h) ? Scalar(0.5) : Scalar(1);
      D(m, k) = Scalar(2) / Scalar(K) * std::cos(Scalar(m * k) * pi / Scalar(h)) * half;
    }
  }
  QuadratureTable<Scalar> table;
  table.order = K;
  table.weights = Scalar(0.5) * (D.transpose() * d);
  table.nodes.resize(h + 1);
  for (int k = 0; k <= h; ++k) table.nodes(k) = (Scalar(1) + std::cos(Scalar(k) * pi / Scalar(K))) / Scalar(2);
  return table;
}

template <typename Scalar>
Scalar log_beta_function(Scalar alpha, Scalar beta) {
  return std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
}

/// Beta(π; α, β) · π^z (1 − π)^{1−z}. Powers are taken directly so a zero
/// exponent at an endpoint yields 1, never 0 · log 0.
template <typename Scalar>
Scalar beta_bernoulli_integrand(Scalar pi, Scalar alpha, Scalar beta, Scalar z, Scalar log_b) {
  return std::exp(-log_b) * std::pow(pi, alpha - 1 + z) * std::pow(1 - pi, beta - z);
}

/// P(z) = ∫ Beta(π; α, β) π^z (1 − π)^{1−z} dπ by conjugacy.
template <typename Scalar>
Scalar closed_form_marginal(Scalar alpha, Scalar beta, Scalar z) {
  return (z * alpha + (1 - z) * beta) / (alpha + beta);
}

/// −log of the quadrature marginal. Doubles K (up to 512) while the sum is
/// not positive, then throws NonFiniteValue.
template <typename Scalar>
Scalar beta_bernoulli_nll(Scalar alpha, Scalar beta, Scalar z, const QuadratureTable<Scalar>& table) {
  const Scalar log_b = log_beta_function(alpha, beta);
  auto f = [&](Scalar pi) { return beta_bernoulli_integrand(pi, alpha, beta, z, log_b); };
  Scalar s = table.integrate(f);
  for (int K = table.order * 2; !(s > 0) && K <= 512; K *= 2) s = cc_table<Scalar>(K).integrate(f);
  if (!(s > 0) || !std::isfinite(static_cast<double>(s))) {
    fail(ErrorCode::NonFiniteValue, "Beta-Bernoulli quadrature sum is not positive at K=512");
  }
  return -std::log(s);
}

/// ((1 − z)α + zβ)/(α + β) · (α − 1 + β − 1 + log B(α, β)).
template <typename Scalar>
Scalar regularizer(Scalar alpha, Scalar beta, Scalar z) {
  return ((1 - z) * alpha + z * beta) / (alpha + beta) * (alpha - 1 + beta - 1 + log_beta_function(alpha, beta));
}

/// Fraction of labeled instances with z_j = 1, clamped to [1e-3, 1 − 1e-3].
/// Throws EmptyDataset without labels and ShapeMismatch on ragged sizes.
Vector class_rates(const std::vector<InstanceSeries>& series);

/// 1 / (r^z (1 − r)^{1−z}) per variable.
Vector class_weights(const Vector& rates, const Vector& z);

/// cᵀẑ + λ_c ‖(Aẑ − b)₊‖² for ẑ = [ẑ_b; ẑ_c].
double unsupervised_loss(const MilpInstance& instance, const Vector& z_binary, const Vector& z_continuous,
                         double lambda_c);

// ---------------------------------------------------------------------------
// Differentiable versions over stacked variables.

namespace ad {

/// Per-row −log marginal for column vectors α, β and constant labels z.
Tensor beta_bernoulli_nll(const Tensor& alpha, const Tensor& beta, const Vector& z,
                          const QuadratureTable<double>& table);
Tensor regularizer(const Tensor& alpha, const Tensor& beta, const Vector& z);

struct SoftAssignment {
  bool sharpened = false;
  double sharpness = 10.0;
};

/// σ(μ) with μ = α/(α+β), or σ(k(μ − ½)) in sharpened mode.
Tensor soft_assignment(const Tensor& alpha, const Tensor& beta, const SoftAssignment& mode = {});

/// Per-row supervision: `mask` is 1 for labeled rows, 0 otherwise; `weight`
/// multiplies the NLL (class weights or ones).
struct SupervisedTargets {
  Vector z;
  Vector mask;
  Vector weight;
};

struct SupervisedTerms {
  Tensor nll;
  Tensor reg;
};

/// Σ mask · weight · nll and Σ mask · reg as separate scalars.
SupervisedTerms supervised_terms(const Tensor& alpha, const Tensor& beta, const SupervisedTargets& targets,
                                 const QuadratureTable<double>& table);

/// Stacked constraint system for the unsupervised loss; A may be block
/// diagonal over several instances.
struct PenaltySystem {
  std::shared_ptr<const SparseMatrix> A;
  Vector b;
  Vector c;
};

struct UnsupervisedTerms {
  Tensor objective;  // cᵀẑ
  Tensor penalty;    // ‖(Aẑ − b)₊‖²
};

UnsupervisedTerms unsupervised_terms(const Tensor& z_hat, const PenaltySystem& system);

}  // namespace ad

/// Linear warm-up from `warmup_initial` to `warmup_final` over
/// `warmup_steps`, then linear to `final_value` at the last training step.
struct Schedule {
  std::int64_t warmup_steps = 0;
  double warmup_initial = 0.0;
  double warmup_final = 0.0;
  double final_value = 0.0;

  double value(std::int64_t step, std::int64_t total_steps) const;
  static Schedule constant(double v) { return {0, v, v, v}; }
};

struct LossWeights {
  Schedule lambda{500, 0.01, 0.1, 1.0};
  Schedule lambda_reg{250, 0.01, 0.1, 1.0};
  Schedule lambda_c{1000, 0.1, 1.0, 10.0};
  bool use_class_weights = false;
  ad::SoftAssignment soft;
  int quadrature_order = 64;
};

struct LossValues {
  double lambda = 0.0;
  double lambda_reg = 0.0;
  double lambda_c = 0.0;
};

LossValues schedule_values(const LossWeights& weights, std::int64_t step, std::int64_t total_steps);

namespace ad {

/// nll + λ_reg·reg + λ·(objective + λ_c·penalty).
Tensor total_loss(const SupervisedTerms& sup, const UnsupervisedTerms& unsup, const LossValues& lambdas);

}  // namespace ad

}  // namespace milpfix
