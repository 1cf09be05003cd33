// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>

#include "rng.hpp"
#include "tensor.hpp"

namespace hfsgm {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

// Scalar kernels shared by the value-level API below and the fused
// differentiable ops.

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// x*log(sigmoid(l)) + (1-x)*log(1-sigmoid(l)) in logit form.
inline double bernoulli_logit_term(double logit, double x) { return x * logit - softplus(logit); }

inline double gaussian_term(double x, double mean, double log_var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + log_var + d * d * std::exp(-log_var));
}

inline double kl_term(double mq, double lq, double mp, double lp) {
  const double d = mq - mp;
  return 0.5 * (std::exp(lq - lp) + d * d * std::exp(-lp) - 1.0 + lp - lq);
}

inline double clamp_log_var(double v) { return std::clamp(v, kLogVarMin, kLogVarMax); }

/// Diagonal Gaussian over a latent slab. log_var is clamped to
/// [kLogVarMin, kLogVarMax] on construction.
class DiagGaussian {
 public:
  DiagGaussian() = default;
  DiagGaussian(Tensor mean, Tensor log_var);

  /// N(0, I) of the given shape.
  static DiagGaussian standard(const Shape& shape);

  const Tensor& mean() const { return mean_; }
  const Tensor& log_var() const { return log_var_; }
  const Shape& shape() const { return mean_.shape(); }
  std::size_t size() const { return mean_.size(); }

 private:
  Tensor mean_;
  Tensor log_var_;
};

/// Per-pixel Bernoulli likelihood parameterized by logits.
class BernoulliImage {
 public:
  explicit BernoulliImage(Tensor logits);
  const Tensor& logits() const { return logits_; }
  /// sigmoid(logits), the per-pixel mean.
  Tensor probabilities() const;

 private:
  Tensor logits_;
};

/// mean + exp(0.5 * log_var) * noise.
Tensor rsample(const DiagGaussian& dist, const Tensor& noise);
Tensor rsample(const DiagGaussian& dist, Rng& rng);

/// KL(q || p), summed over all coordinates.
double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p);

/// Sum of log N(x_i; mean_i, exp(log_var_i)).
double gaussian_log_prob(const DiagGaussian& dist, std::span<const double> x);

/// Sum over pixels of the Bernoulli log-likelihood; x must be binary.
double bernoulli_log_prob(const BernoulliImage& dist, std::span<const double> x);

}  // namespace hfsgm
