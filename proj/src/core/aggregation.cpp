// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "errors.hpp"
#include "ops.hpp"

namespace hfsgm {

using ad::Var;

const char* aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::mean: return "mean";
    case Aggregator::max: return "max";
    case Aggregator::lag: return "lag";
  }
  return "?";
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "mean") return Aggregator::mean;
  if (name == "max") return Aggregator::max;
  if (name == "lag") return Aggregator::lag;
  throw ConfigError("unknown aggregator '" + name + "'; valid: mean, max, lag");
}

int lag_head_dim(int dim, int heads) { return std::max(1, dim / std::max(heads, 1)); }

void declare_lag(ParamStore& store, Initializer& init, const std::string& prefix, int dim, int heads) {
  if (heads < 1) throw ConfigError("attention heads must be >= 1");
  const int width = heads * lag_head_dim(dim, heads);
  store.add(prefix + ".wq", init.weight({width, dim}, dim));
  store.add(prefix + ".bq", init.zeros({width}));
  store.add(prefix + ".wk", init.weight({width, dim}, dim));
  store.add(prefix + ".bk", init.zeros({width}));
  store.add(prefix + ".wv", init.weight({width, dim}, dim));
  store.add(prefix + ".bv", init.zeros({width}));
  store.add(prefix + ".wo", init.weight({dim, width}, width));
  store.add(prefix + ".bo", init.zeros({dim}));
}

LagVars bind_lag(Binder& bind, const std::string& prefix, int heads) {
  return LagVars{heads,
                 bind(prefix + ".wq"), bind(prefix + ".bq"), bind(prefix + ".wk"), bind(prefix + ".bk"),
                 bind(prefix + ".wv"), bind(prefix + ".bv"), bind(prefix + ".wo"), bind(prefix + ".bo")};
}

LagVars bind_lag(ad::Tape& tape, LagParams& p, LagParams* g) {
  auto b = [&](Tensor& v, Tensor* sink) { return tape.parameter(v, sink); };
  return LagVars{p.heads,
                 b(p.wq, g ? &g->wq : nullptr), b(p.bq, g ? &g->bq : nullptr),
                 b(p.wk, g ? &g->wk : nullptr), b(p.bk, g ? &g->bk : nullptr),
                 b(p.wv, g ? &g->wv : nullptr), b(p.bv, g ? &g->bv : nullptr),
                 b(p.wo, g ? &g->wo : nullptr), b(p.bo, g ? &g->bo : nullptr)};
}

std::vector<int> canonical_permutation(const Tensor& elements, int group) {
  const int rows = elements.rows();
  if (group < 1 || rows % group != 0) throw ContractError("canonical_permutation: bad group size");
  const std::size_t rs = elements.row_size();
  std::vector<int> perm(static_cast<std::size_t>(rows));
  std::iota(perm.begin(), perm.end(), 0);
  auto key_less = [&](int a, int b) {
    auto ra = elements.row(a), rb = elements.row(b);
    for (std::size_t i = 0; i < rs; ++i) {
      std::uint64_t ba, bb;
      std::memcpy(&ba, &ra[i], sizeof ba);
      std::memcpy(&bb, &rb[i], sizeof bb);
      if (ba != bb) return ba < bb;
    }
    return false;
  };
  for (int t = 0; t < rows / group; ++t) {
    auto first = perm.begin() + t * group;
    std::stable_sort(first, first + group, key_less);
  }
  return perm;
}

namespace {

Var maybe_canonical(const Var& elements, int group, bool canonical) {
  if (!canonical || group == 1) return elements;
  return ad::gather_rows(elements, canonical_permutation(elements.value(), group));
}

Var flat(const Var& x) { return x.rank() == 2 ? x : ad::reshape(x, {x.rows(), static_cast<int>(x.row_size())}); }

Var restore(const Var& pooled, const Shape& element_shape) {
  Shape s = element_shape;
  s[0] = pooled.rows();
  return pooled.shape() == s ? pooled : ad::reshape(pooled, s);
}

LagOutput attention(const Var& elements, int group, const LagVars& p, const AggregateOptions& opts) {
  const Var e = flat(maybe_canonical(elements, group, opts.canonical_order));
  const int width = p.wq.shape()[0];
  if (p.wq.shape()[1] != static_cast<int>(e.row_size())) {
    throw ContractError("lag_pool: element dimension " + std::to_string(e.row_size()) +
                        " does not match projection " + shape_str(p.wq.shape()));
  }
  if (width % p.heads != 0) throw ContractError("lag_pool: projection width not divisible by heads");
  const int head_dim = width / p.heads;
  const Var r = ad::group_mean(e, group);
  const Var q = ad::repeat_rows(ad::linear(r, p.wq, p.bq), group);
  const Var k = ad::linear(e, p.wk, p.bk);
  const Var v = ad::linear(e, p.wv, p.bv);
  const Var scores = ad::head_dot(q, k, p.heads, 1.0 / std::sqrt(static_cast<double>(head_dim)));
  const Var alpha = ad::group_softmax(scores, group);
  const Var heads = ad::group_sum(ad::head_weight(v, alpha, p.heads), group);
  Var out = ad::linear(heads, p.wo, p.bo);
  if (opts.lag_residual) out = ad::add(out, r);
  return {restore(out, elements.shape()), alpha};
}

}  // namespace

Var mean_pool(const Var& elements, int group, const AggregateOptions& opts) {
  return ad::group_mean(maybe_canonical(elements, group, opts.canonical_order), group);
}

Var max_pool(const Var& elements, int group) { return ad::group_max(elements, group); }

LagOutput lag_pool(const Var& elements, int group, const LagVars& params, const AggregateOptions& opts) {
  return attention(elements, group, params, opts);
}

Var fuse_elements(const Var& h, const Var& z, const Var& c, int group, const FusionVars& f) {
  const Var hf = flat(h), zf = flat(z), cf = flat(c);
  if (hf.rows() != zf.rows()) {
    throw ContractError("lag_pool_hierarchical: " + std::to_string(hf.rows()) + " embeddings but " +
                        std::to_string(zf.rows()) + " latents");
  }
  if (cf.rows() * group != hf.rows()) {
    throw ContractError("lag_pool_hierarchical: set latent count does not match the number of sets");
  }
  Var pre = ad::add(ad::linear(hf, f.wh, f.b), ad::linear(zf, f.wz, Var()));
  pre = ad::add(pre, ad::repeat_rows(ad::linear(cf, f.wc, Var()), group));
  return ad::elu(pre);
}

LagOutput lag_pool_hierarchical(const Var& h, const Var& z, const Var& c, int group, const FusionVars& fusion,
                                const LagVars& params, const AggregateOptions& opts) {
  return attention(fuse_elements(h, z, c, group, fusion), group, params, opts);
}

Var aggregate(Aggregator kind, const Var& elements, int group, const LagVars* lag, const AggregateOptions& opts) {
  switch (kind) {
    case Aggregator::mean: return mean_pool(elements, group, opts);
    case Aggregator::max: return max_pool(elements, group);
    case Aggregator::lag:
      if (lag == nullptr) throw ContractError("aggregate: LAG requested without parameters");
      return lag_pool(elements, group, *lag, opts).pooled;
  }
  throw ContractError("aggregate: unknown aggregator");
}

namespace {

void require_nonempty(const Tensor& elements, const char* op) {
  if (elements.rank() < 1 || elements.rows() < 1) throw ContractError(std::string(op) + ": empty set");
}

}  // namespace

Tensor mean_pool(const Tensor& elements, const AggregateOptions& opts) {
  require_nonempty(elements, "mean_pool");
  ad::Tape tape;
  Tensor out = mean_pool(tape.constant(elements), elements.rows(), opts).value();
  return out.reshaped({static_cast<int>(out.size())});
}

Tensor max_pool(const Tensor& elements) {
  require_nonempty(elements, "max_pool");
  ad::Tape tape;
  Tensor out = max_pool(tape.constant(elements), elements.rows()).value();
  return out.reshaped({static_cast<int>(out.size())});
}

Tensor lag_pool(const Tensor& elements, LagParams params, const AggregateOptions& opts, Tensor* weights) {
  require_nonempty(elements, "lag_pool");
  ad::Tape tape;
  LagVars vars = bind_lag(tape, params, nullptr);
  LagOutput out = lag_pool(tape.constant(elements), elements.rows(), vars, opts);
  if (weights != nullptr) *weights = out.weights.value();
  return out.pooled.value().reshaped({static_cast<int>(out.pooled.value().size())});
}

}  // namespace hfsgm
