// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Linear-Gaussian set model with closed-form answers:
//   c ~ N(0, var_c),  z_s | c ~ N(c, var_z),  x_s | z_s ~ N(z_s, var_x).
// Observations of dimension d are d independent copies sharing the variances.

#pragma once

#include <vector>

#include "objective.hpp"
#include "set_model.hpp"

namespace hfsgm {

struct LinearGaussianInstance {
  double var_c = 1.0;
  double var_z = 1.0;
  double var_x = 1.0;
  SetData x;  // S rows of dimension d; S may be zero

  void validate() const;
  int size() const { return x.size; }
  int dim() const { return x.dim; }
};

/// log N(X; 0, (var_z + var_x) I + var_c J), summed over dimensions.
double exact_log_marginal(const LinearGaussianInstance& inst);

/// Nested trapezoid quadrature over c and each z_s on a +-span sd grid.
double quadrature_log_marginal(const LinearGaussianInstance& inst, int points = 401, double span = 8.0);

struct ExactPosterior {
  std::vector<double> c_mean;  // [d]
  double c_var = 0.0;
  std::vector<double> z_mean;  // [S*d]
  double z_var = 0.0;          // marginal Var(z_s | X)
  double z_slope = 0.0;        // E[z_s | c, x_s] = z_slope * c + z_gain * x_s
  double z_gain = 0.0;
  double z_cond_var = 0.0;     // Var(z_s | c, x_s)
  double cov_cz = 0.0;
  double cov_zz = 0.0;         // s != t

  /// Covariance of (c, z_1..z_S) for one dimension, row-major (S+1)^2.
  std::vector<double> joint_covariance(int set_size) const;
};

/// Fully factorized Gaussian over (c, z_1..z_S).
struct DiagPosterior {
  std::vector<double> c_mean;
  double c_var = 0.0;
  std::vector<double> z_mean;
  double z_var = 0.0;
};

ExactPosterior exact_posteriors(const LinearGaussianInstance& inst);
/// Matched means and the marginal variances of the joint posterior.
DiagPosterior mean_field(const ExactPosterior& post);

struct Predictive {
  std::vector<double> mean;  // [d]
  double var = 0.0;
};
Predictive exact_predictive(const LinearGaussianInstance& inst);

/// Analytic bound decomposition for a factorized posterior.
ElboTerms gaussian_elbo(const LinearGaussianInstance& inst, const DiagPosterior& q);
/// Decomposition under the exact joint posterior; elbo() equals the log marginal.
ElboTerms exact_elbo_terms(const LinearGaussianInstance& inst);

/// log p(X, Z, c); c is [d], z is [S*d].
double log_joint(const LinearGaussianInstance& inst, const std::vector<double>& c, const std::vector<double>& z);
/// Monte-Carlo bound with `samples` draws from q.
double mc_elbo(const LinearGaussianInstance& inst, const DiagPosterior& q, int samples, Rng& rng);

/// Posterior means as linear maps of the set:
///   mean_c = a * sum_t x_t,  mean_z_s = b * x_s + e * sum_t x_t,
/// with learned log variances.
struct LinearPosterior {
  double a = 0.0, b = 0.0, e = 0.0;
  double log_var_c = 0.0, log_var_z = 0.0;

  DiagPosterior apply(const LinearGaussianInstance& inst) const;
};

struct LinearPosteriorTraining {
  int set_size = 5;
  int dim = 1;
  int sets = 200;
  int iters = 50;
  double fd_step = 1e-4;
};

/// Maximizes the mean analytic bound over sets drawn from the model using
/// finite-difference derivatives.
LinearPosterior train_linear_posterior(double var_c, double var_z, double var_x, const LinearPosteriorTraining& opts,
                                       Rng& rng);

/// Draws a set of S observations; `c` overrides the prior draw when given.
SetData sample_oracle_set(double var_c, double var_z, double var_x, int set_size, int dim, Rng& rng,
                          const std::vector<double>* c = nullptr);

/// The oracle family behind the generic set-model interface.
class LinearGaussianModel final : public SetModel {
 public:
  enum class Posterior { exact, mean_field, learned };

  LinearGaussianModel(double var_c, double var_z, double var_x, int dim, Posterior posterior = Posterior::exact,
                      LinearPosterior learned = {});

  int observation_dim() const override { return dim_; }
  int layers() const override { return 1; }

  /// Analytic (zero-variance) decomposition per set.
  std::vector<ElboTerms> elbo(const std::vector<const SetData*>& sets, Rng& rng) override;
  std::vector<double> log_weights(const SetData& x, int draws, Rng& rng) override;
  Generated sample_unconditional(int n, Rng& rng) override;
  Generated sample_conditional(const SetData& x, Rng& rng) override;
  Generated reconstruct(const SetData& x, RefineMode mode, Rng& rng) override;
  double predictive_log_likelihood(const SetData& context, std::span<const double> x, int draws, Rng& rng) override;
  double context_divergence(const SetData& a, const SetData& b) override;

  LinearGaussianInstance instance(const SetData& x) const;

 private:
  struct Draw {
    std::vector<double> c, z;
    double log_q = 0.0;
  };
  Draw draw_posterior(const LinearGaussianInstance& inst, Rng& rng) const;
  void context_posterior(const SetData& x, std::vector<double>& mean, double& var) const;

  double var_c_, var_z_, var_x_;
  int dim_;
  Posterior posterior_;
  LinearPosterior learned_;
};

}  // namespace hfsgm
