// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "model.hpp"
#include "set_model.hpp"

namespace hfsgm {

/// SetModel view of a NeuralModel in evaluation mode. Large requests are
/// split into chunks of at most `max_rows` images.
class NeuralSetModel final : public SetModel {
 public:
  explicit NeuralSetModel(NeuralModel& model, int max_rows = 400) : model_(model), max_rows_(max_rows) {}

  int observation_dim() const override;
  int layers() const override { return model_.config().layers; }

  std::vector<ElboTerms> elbo(const std::vector<const SetData*>& sets, Rng& rng) override;
  std::vector<double> log_weights(const SetData& x, int draws, Rng& rng) override;
  Generated sample_unconditional(int n, Rng& rng) override;
  Generated sample_conditional(const SetData& x, Rng& rng) override;
  Generated reconstruct(const SetData& x, RefineMode mode, Rng& rng) override;
  double predictive_log_likelihood(const SetData& context, std::span<const double> x, int draws, Rng& rng) override;
  double context_divergence(const SetData& a, const SetData& b) override;

  NeuralModel& model() { return model_; }

 private:
  GaussianVars top_posterior(Graph& g, const SetData& x);

  NeuralModel& model_;
  int max_rows_;
};

}  // namespace hfsgm
