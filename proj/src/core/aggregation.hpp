// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Permutation-invariant set pooling: mean, max and learnable attention
// aggregation (LAG).
//
// Every differentiable entry point takes elements as a [T*S, D...] Var and
// pools each consecutive group of S rows into one [T, D...] row.

#pragma once

#include <string>

#include "autodiff.hpp"
#include "params.hpp"

namespace hfsgm {

enum class Aggregator { mean, max, lag };

const char* aggregator_name(Aggregator a);
Aggregator parse_aggregator(const std::string& name);

struct AggregateOptions {
  /// Sort each set's elements by their byte representation before
  /// accumulating, so pooled sums are bitwise independent of input order.
  bool canonical_order = true;
  /// Add the handcrafted mean query back onto the attention output.
  bool lag_residual = false;
};

/// Attention parameters for D-dimensional elements with `heads` heads of
/// width head_dim. Projections are stacked per head: wq/wk/wv are
/// [heads*head_dim, D], the merge wo is [D, heads*head_dim].
struct LagParams {
  int heads = 1;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  int dim() const { return wq.dim(1); }
  int head_dim() const { return wq.dim(0) / heads; }
};

struct LagVars {
  int heads = 1;
  ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Declares LAG parameters under `prefix` ("<prefix>.wq", ...).
void declare_lag(ParamStore& store, Initializer& init, const std::string& prefix, int dim, int heads);
LagVars bind_lag(Binder& bind, const std::string& prefix, int heads);
LagVars bind_lag(ad::Tape& tape, LagParams& params, LagParams* grads);

/// Default per-head width: dim / heads (at least 1).
int lag_head_dim(int dim, int heads);

struct LagOutput {
  ad::Var pooled;   // [T, D]
  ad::Var weights;  // [T*S, heads], softmax over each set
};

/// Per-set permutation that sorts rows by their byte representation.
std::vector<int> canonical_permutation(const Tensor& elements, int group);

ad::Var mean_pool(const ad::Var& elements, int group, const AggregateOptions& opts = {});
ad::Var max_pool(const ad::Var& elements, int group);
LagOutput lag_pool(const ad::Var& elements, int group, const LagVars& params, const AggregateOptions& opts = {});

/// Fused elements for hierarchical LAG: elu(Wh h + Wz z + Wc c_s + b) with
/// c broadcast to every element of its set.
struct FusionVars {
  ad::Var wh, wz, wc, b;
};
ad::Var fuse_elements(const ad::Var& h, const ad::Var& z, const ad::Var& c, int group, const FusionVars& params);

/// Fusion followed by the attention pipeline.
LagOutput lag_pool_hierarchical(const ad::Var& h, const ad::Var& z, const ad::Var& c, int group,
                                const FusionVars& fusion, const LagVars& params,
                                const AggregateOptions& opts = {});

/// Dispatch for mean/max/lag. `lag` is only read for Aggregator::lag.
ad::Var aggregate(Aggregator kind, const ad::Var& elements, int group, const LagVars* lag,
                  const AggregateOptions& opts);

// Value-level conveniences over a single set [S, D].
Tensor mean_pool(const Tensor& elements, const AggregateOptions& opts = {});
Tensor max_pool(const Tensor& elements);
Tensor lag_pool(const Tensor& elements, LagParams params, const AggregateOptions& opts = {},
                Tensor* weights = nullptr);

}  // namespace hfsgm
