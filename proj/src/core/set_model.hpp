// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Interface shared by the image model and the analytic linear-Gaussian
// model, so evaluation, sampling and classification run against either.

#pragma once

#include <span>
#include <vector>

#include "objective.hpp"
#include "rng.hpp"
#include "set_data.hpp"

namespace hfsgm {

/// Emitted observations plus the likelihood means they were drawn from.
struct Generated {
  SetData samples;
  SetData means;
};

enum class RefineMode {
  posterior,  // every latent from the posterior on the augmented set
  mixed,      // top context and sample latents from the posterior, the rest from the prior
};

const char* refine_mode_name(RefineMode m);
RefineMode parse_refine_mode(const std::string& name);

class SetModel {
 public:
  virtual ~SetModel() = default;

  virtual int observation_dim() const = 0;
  virtual int layers() const = 0;

  /// One-draw bound decomposition per set; sets must share a size.
  virtual std::vector<ElboTerms> elbo(const std::vector<const SetData*>& sets, Rng& rng) = 0;
  /// log p(X, Z, c) - log q(Z, c | X) for independent posterior draws.
  virtual std::vector<double> log_weights(const SetData& x, int draws, Rng& rng) = 0;

  virtual Generated sample_unconditional(int n, Rng& rng) = 0;
  /// c_L from q(c_L | X), everything else from the prior, one observation.
  virtual Generated sample_conditional(const SetData& x, Rng& rng) = 0;
  /// Redraws every observation of x from latents inferred on x.
  virtual Generated reconstruct(const SetData& x, RefineMode mode, Rng& rng) = 0;

  /// Monte-Carlo mean of log p(x | z, c) under single-pass conditional draws.
  virtual double predictive_log_likelihood(const SetData& context, std::span<const double> x, int draws,
                                           Rng& rng) = 0;
  /// KL(q(c_L | a) || q(c_L | b)).
  virtual double context_divergence(const SetData& a, const SetData& b) = 0;
};

}  // namespace hfsgm
