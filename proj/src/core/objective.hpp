// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "model.hpp"

namespace hfsgm {

/// Per-set bound decomposition. Entries of kl_z are indexed by layer - 1;
/// kl_c holds one entry per drawn context latent, top layer last.
struct ElboTerms {
  double rec = 0.0;
  std::vector<double> kl_z;
  std::vector<double> kl_c;
  int set_size = 0;

  double kl_total() const;
  double elbo() const;
};

struct AnnealState {
  double alpha = 1.0;
  double alpha_step = 0.9;
};

AnnealState anneal(const AnnealState& state);

/// Per-sample weighted negative bound:
/// [(1+a)(-rec) + (sum KL)/(1+a)] / S.
double weighted_loss(const ElboTerms& terms, double alpha);

/// Mean of the per-set weighted losses; all sets must share S.
double batch_loss(const std::vector<ElboTerms>& terms, double alpha);

/// Differentiable per-set terms, each a [sets] vector.
struct ElboVars {
  ad::Var rec;
  std::vector<ad::Var> kl_z;
  std::vector<ad::Var> kl_c;
};

/// `targets` holds the observations in the row layout of pass.logits.
ElboVars elbo_vars(const PassVars& pass, const Tensor& targets);

/// Scalar training loss: mean over sets of the per-sample weighted loss.
ad::Var weighted_loss_var(const ElboVars& terms, double alpha, int set_size);

std::vector<ElboTerms> to_terms(const ElboVars& terms, int set_size);

/// Per-set log p(X, Z, c) - log q(Z, c | X) at the drawn latents.
ad::Var log_weight_vars(const PassVars& pass, const Tensor& targets);

}  // namespace hfsgm
