// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Hierarchical set-conditioned VAE.
//
// Latent slabs are [rows, channels, R, R] tensors (R = 1 is the dense mode).
// Context latents c have one row per set; sample latents z have one row per
// element, sets laid out as consecutive blocks of `group` rows. Layer 1 is
// nearest the data, layer L is the top.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "distributions.hpp"
#include "model_config.hpp"
#include "noise.hpp"
#include "params.hpp"
#include "set_data.hpp"

namespace hfsgm {

/// Tape plus parameter binding for one forward evaluation.
struct Graph {
  ad::Tape tape;
  ParamStore& store;
  Binder bind;
  bool training;

  Graph(ParamStore& s, bool with_grad, bool training_mode)
      : store(s), bind(tape, s, with_grad), training(training_mode) {}
};

struct GaussianVars {
  ad::Var mean;
  ad::Var log_var;
  bool valid() const { return mean.valid(); }
};

struct LayerVars {
  ad::Var c;           // context used at this layer (shared across layers for bns/ns)
  bool owns_c = false;  // c was drawn at this layer
  GaussianVars qc, pc;
  ad::Var z;
  GaussianVars qz, pz;
};

struct PassVars {
  int sets = 0;
  int group = 0;
  std::vector<LayerVars> layers;  // index l-1
  ad::Var logits;                 // [sets*group, 1, H, W]
};

/// How many layers, counted from the top, draw from the posterior rather than
/// the prior. A full posterior pass uses L for both.
struct PassPlan {
  int posterior_c_layers = 0;
  int posterior_z_layers = 0;
  const GaussianVars* top_context = nullptr;  // overrides q(c_L | X) when set
  bool decode = true;
};

struct LayerState {
  Tensor c;
  bool owns_c = false;
  std::optional<DiagGaussian> qc, pc;
  Tensor z;
  std::optional<DiagGaussian> qz;
  DiagGaussian pz;
};

struct LatentState {
  int sets = 0;
  int group = 0;
  std::vector<LayerState> layers;  // index l-1
  int context_pairs() const;
};

class NeuralModel {
 public:
  explicit NeuralModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// [T*S, 1, H, W] from T sets of equal size.
  Tensor stack(const std::vector<const SetData*>& sets) const;

  ad::Var encode_trunk(Graph& g, const Tensor& images);
  /// Trunk output mapped onto the latent grid: [N, F, R, R].
  ad::Var features(Graph& g, const ad::Var& trunk);

  GaussianVars posterior_c_top(Graph& g, const ad::Var& feat, int group);
  GaussianVars posterior_c(Graph& g, int layer, const ad::Var& c_above, const ad::Var& z_above,
                           const ad::Var& feat, int group);
  GaussianVars prior_c(Graph& g, int layer, const ad::Var& c_above, const ad::Var& z_above, int group);
  GaussianVars posterior_z(Graph& g, int layer, const ad::Var& z_above, const ad::Var& c, const ad::Var& feat,
                           int group);
  GaussianVars prior_z(Graph& g, int layer, const ad::Var& z_above, const ad::Var& c, int rows, int group);
  ad::Var decode(Graph& g, const std::vector<ad::Var>& z, const std::vector<ad::Var>& c, int group);

  /// Top-down pass. `feat` may be invalid when no posterior layer needs it.
  PassVars run(Graph& g, const ad::Var& feat, int sets, int group, const PassPlan& plan, NoiseSource& noise);

  /// Full posterior pass over one set in evaluation mode.
  LatentState infer(const SetData& x, NoiseSource& noise);

  GaussianVars standard_normal(Graph& g, int rows, std::size_t row_size) const;

 private:
  void declare();
  ad::Var conv(Graph& g, const ad::Var& x, const std::string& name, bool bias = false);
  ad::Var bias_like(Graph& g, const std::string& name, int rows);
  GaussianVars head(Graph& g, const std::string& prefix, const ad::Var& hidden);
  ad::Var pool(Graph& g, const std::string& prefix, const ad::Var& elements, int group);
  ad::Var norm(Graph& g, const std::string& prefix, const ad::Var& x);
  ad::Var residual(Graph& g, const std::string& prefix, ad::Var x);
  ad::Var draw(const GaussianVars& dist, NoiseSite::Kind kind, int layer, int sets, int group,
               NoiseSource& noise);

  ModelConfig cfg_;
  ParamStore store_;
};

LatentState extract(const PassVars& pass);

}  // namespace hfsgm
