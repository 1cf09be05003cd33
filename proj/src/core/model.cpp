// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include "errors.hpp"
#include "ops.hpp"

namespace hfsgm {

using ad::Var;

namespace {

std::string layer_name(const char* kind, int layer) { return kind + std::to_string(layer); }

Var flatten(const Var& x) { return ad::reshape(x, {x.rows(), static_cast<int>(x.row_size())}); }

Var sum_all(const std::vector<Var>& terms) {
  Var acc;
  for (const Var& t : terms) {
    if (!t.valid()) continue;
    acc = acc.valid() ? ad::add(acc, t) : t;
  }
  return acc;
}

}  // namespace

int LatentState::context_pairs() const {
  int n = 0;
  for (const auto& l : layers) n += l.owns_c ? 1 : 0;
  return n;
}

NeuralModel::NeuralModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  declare();
}

// ------------------------------------------------------------- declaration

void NeuralModel::declare() {
  Initializer init(cfg_.init, cfg_.seed);
  const int k = cfg_.head_kernel();
  const int hid = cfg_.hidden_channels;
  const int feat = cfg_.feature_channels();
  const int cc = cfg_.c_channels, cz = cfg_.z_channels;
  const int res = cfg_.latent_resolution;
  const int L = cfg_.layers;
  const auto& widths = cfg_.encoder_widths;
  const int stages = static_cast<int>(widths.size());

  auto conv_w = [&](const std::string& name, int out, int in, int kk) {
    store_.add(name, init.weight({out, in, kk, kk}, in * kk * kk));
  };
  auto bias = [&](const std::string& name, int n) { store_.add(name, init.zeros({n})); };
  auto bn = [&](const std::string& prefix, int ch) {
    if (!cfg_.batch_norm) return;
    store_.add(prefix + ".gamma", init.ones({ch}));
    store_.add(prefix + ".beta", init.zeros({ch}));
    store_.add(prefix + ".mean", Tensor({ch}, 0.0), false);
    store_.add(prefix + ".var", Tensor({ch}, 1.0), false);
  };
  auto head = [&](const std::string& prefix, int out) {
    conv_w(prefix + ".hid", hid, hid, k);
    bias(prefix + ".hid.b", hid);
    store_.add(prefix + ".mean", init.zeros({out, hid, k, k}));
    bias(prefix + ".mean.b", out);
    store_.add(prefix + ".logvar", init.zeros({out, hid, k, k}));
    bias(prefix + ".logvar.b", out);
  };
  auto pooling = [&](const std::string& prefix) {
    if (cfg_.aggregator == Aggregator::lag) declare_lag(store_, init, prefix + ".lag", hid * res * res, cfg_.heads);
  };

  for (int i = 0; i < stages; ++i) {
    const std::string p = "enc" + std::to_string(i);
    conv_w(p + ".w", widths[static_cast<std::size_t>(i)], i == 0 ? 1 : widths[static_cast<std::size_t>(i) - 1], 3);
    bias(p + ".b", widths[static_cast<std::size_t>(i)]);
    bn(p + ".bn", widths[static_cast<std::size_t>(i)]);
  }
  auto residual = [&](const std::string& prefix) {
    const int ch = widths.back();
    for (int r = 0; r < cfg_.residual_blocks; ++r) {
      const std::string p = prefix + std::to_string(r);
      for (const char* part : {".a", ".b"}) {
        conv_w(p + part, ch, ch, 3);
        bias(p + part + ".b", ch);
        bn(p + part + ".bn", ch);
      }
    }
  };
  residual("enc.res");
  const int th = cfg_.trunk_heights().back(), tw = cfg_.trunk_widths().back();
  const int trunk_size = widths.back() * th * tw;
  if (res == 1) {
    store_.add("feat.w", init.weight({hid, trunk_size}, trunk_size));
    bias("feat.b", hid);
  }

  if (cfg_.context) {
    const std::string top = layer_name("qc", L);
    conv_w(top + ".embed", hid, feat, k);
    bias(top + ".embed.b", hid);
    pooling(top);
    head(top, cc);
    if (cfg_.variant == Variant::hfsgm) {
      for (int l = 1; l < L; ++l) {
        const std::string q = layer_name("qc", l), p = layer_name("pc", l);
        conv_w(q + ".fh", hid, feat, k);
        conv_w(q + ".fz", hid, cz, k);
        conv_w(q + ".fc", hid, cc, k);
        bias(q + ".b", hid);
        pooling(q);
        head(q, cc);
        conv_w(p + ".fz", hid, cz, k);
        conv_w(p + ".fc", hid, cc, k);
        bias(p + ".b", hid);
        pooling(p);
        head(p, cc);
      }
    }
  }

  for (int l = 1; l <= L; ++l) {
    const std::string q = layer_name("qz", l), p = layer_name("pz", l);
    conv_w(q + ".fx", hid, feat, k);
    if (l < L) conv_w(q + ".fz", hid, cz, k);
    if (cfg_.context) conv_w(q + ".fc", hid, cc, k);
    bias(q + ".b", hid);
    head(q, cz);
    if (l < L) conv_w(p + ".fz", hid, cz, k);
    if (cfg_.context) conv_w(p + ".fc", hid, cc, k);
    bias(p + ".b", hid);
    head(p, cz);
  }

  // Dense latents meet the decoder at the hidden width; spatial ones at the trunk width.
  const int cd = res == 1 ? hid : widths.back();
  for (int l = 1; l <= L; ++l) {
    conv_w(layer_name("dec.z", l), cd, cz, k);
    // Decoder context inputs start at zero, see the stage biases below.
    if (cfg_.context && (cfg_.variant == Variant::hfsgm || l == L)) {
      store_.add(layer_name("dec.c", l), init.zeros({cd, cc, k, k}));
    }
  }
  bias("dec.b", cd);
  residual("dec.res");
  if (res == 1) {
    store_.add("dec.dense.w", init.weight({trunk_size, cd}, cd));
    bias("dec.dense.b", trunk_size);
  }
  for (int i = stages - 1; i >= 0; --i) {
    const std::string p = "dec.up" + std::to_string(i);
    const int in = widths[static_cast<std::size_t>(i)];
    const int out = i == 0 ? 1 : widths[static_cast<std::size_t>(i) - 1];
    store_.add(p + ".w", init.weight({in, out, 3, 3}, in * 9));
    bias(p + ".b", out);
    if (cfg_.context) {
      for (int l = 1; l <= L; ++l) {
        if (cfg_.variant != Variant::hfsgm && l != L) continue;
        // Zero start: context reaches the pixels only once it is informative,
        // so early posterior noise in c does not corrupt reconstructions.
        store_.add(p + layer_name(".c", l), init.zeros({out, static_cast<int>(cfg_.c_size())}));
      }
    }
    if (i > 0) bn(p + ".bn", out);
  }
}

// ------------------------------------------------------------- helpers

Var NeuralModel::conv(Graph& g, const Var& x, const std::string& name, bool with_bias) {
  Var w = g.bind(name);
  const int k = w.shape()[2];
  return ad::conv2d(x, w, with_bias ? g.bind(name + ".b") : Var(), 1, k / 2);
}

Var NeuralModel::bias_like(Graph& g, const std::string& name, int rows) {
  Var b = g.bind(name);
  const int ch = b.shape()[0];
  const int r = cfg_.latent_resolution;
  Var rep = ad::repeat_rows(ad::reshape(b, {1, ch}), rows);
  return ad::add_channel_bias(g.tape.constant(Tensor({rows, ch, r, r}, 0.0)), rep);
}

Var NeuralModel::norm(Graph& g, const std::string& prefix, const Var& x) {
  if (!cfg_.batch_norm) return x;
  return ad::batch_norm(x, g.bind(prefix + ".gamma"), g.bind(prefix + ".beta"), g.bind.buffer(prefix + ".mean"),
                        g.bind.buffer(prefix + ".var"), g.training);
}

GaussianVars NeuralModel::head(Graph& g, const std::string& prefix, const Var& hidden) {
  Var h = ad::elu(conv(g, hidden, prefix + ".hid", true));
  return {conv(g, h, prefix + ".mean", true), ad::clamp(conv(g, h, prefix + ".logvar", true), kLogVarMin, kLogVarMax)};
}

Var NeuralModel::pool(Graph& g, const std::string& prefix, const Var& elements, int group) {
  const AggregateOptions opts{cfg_.canonical_order, cfg_.lag_residual};
  if (cfg_.aggregator == Aggregator::lag) {
    LagVars lag = bind_lag(g.bind, prefix + ".lag", cfg_.heads);
    return aggregate(cfg_.aggregator, elements, group, &lag, opts);
  }
  return aggregate(cfg_.aggregator, elements, group, nullptr, opts);
}

GaussianVars NeuralModel::standard_normal(Graph& g, int rows, std::size_t row_size) const {
  const int r = cfg_.latent_resolution;
  const int ch = static_cast<int>(row_size) / (r * r);
  return {g.tape.constant(Tensor({rows, ch, r, r}, 0.0)), g.tape.constant(Tensor({rows, ch, r, r}, 0.0))};
}

Var NeuralModel::draw(const GaussianVars& dist, NoiseSite::Kind kind, int layer, int sets, int group,
                      NoiseSource& noise) {
  Tensor eps(dist.mean.shape(), 0.0);
  NoiseSite site{kind, layer, 0, -1};
  for (int t = 0; t < sets; ++t) {
    site.set = t;
    if (kind == NoiseSite::Kind::context) {
      noise.fill(site, eps.row(t));
      continue;
    }
    for (int s = 0; s < group; ++s) {
      site.element = s;
      noise.fill(site, eps.row(t * group + s));
    }
  }
  return ad::rsample(dist.mean, dist.log_var, eps);
}

// ------------------------------------------------------------- networks

Tensor NeuralModel::stack(const std::vector<const SetData*>& sets) const {
  if (sets.empty()) throw ContractError("stack: no sets");
  const int s = sets.front()->size;
  const int h = cfg_.image_height, w = cfg_.image_width;
  if (s < 1) throw ContractError("stack: empty set");
  Tensor out({static_cast<int>(sets.size()) * s, 1, h, w});
  int row = 0;
  for (const SetData* set : sets) {
    if (set->size != s) throw ContractError("stack: mixed set sizes in one batch");
    if (set->dim != h * w) {
      throw ContractError("stack: observation size " + std::to_string(set->dim) + " does not match " +
                          std::to_string(h) + "x" + std::to_string(w));
    }
    std::copy(set->values.begin(), set->values.end(), out.row(row).begin());
    row += s;
  }
  return out;
}

Var NeuralModel::encode_trunk(Graph& g, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != cfg_.image_height ||
      images.dim(3) != cfg_.image_width) {
    throw ContractError("encode_trunk: expected [N, 1, " + std::to_string(cfg_.image_height) + ", " +
                        std::to_string(cfg_.image_width) + "], got " + shape_str(images.shape()));
  }
  Var x = g.tape.constant(images);
  for (std::size_t i = 0; i < cfg_.encoder_widths.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    x = ad::conv2d(x, g.bind(p + ".w"), g.bind(p + ".b"), 2, 1);
    x = ad::elu(norm(g, p + ".bn", x));
  }
  return residual(g, "enc.res", x);
}

Var NeuralModel::residual(Graph& g, const std::string& prefix, Var x) {
  for (int r = 0; r < cfg_.residual_blocks; ++r) {
    const std::string p = prefix + std::to_string(r);
    Var y = ad::elu(norm(g, p + ".a.bn", conv(g, x, p + ".a", true)));
    y = norm(g, p + ".b.bn", conv(g, y, p + ".b", true));
    x = ad::elu(ad::add(x, y));
  }
  return x;
}

Var NeuralModel::features(Graph& g, const Var& trunk) {
  const int r = cfg_.latent_resolution;
  const int rt = cfg_.trunk_resolution();
  if (r == 1) {
    Var h = ad::elu(ad::linear(flatten(trunk), g.bind("feat.w"), g.bind("feat.b")));
    return ad::reshape(h, {h.rows(), cfg_.hidden_channels, 1, 1});
  }
  return r == rt ? trunk : ad::avg_pool(trunk, rt / r);
}

GaussianVars NeuralModel::posterior_c_top(Graph& g, const Var& feat, int group) {
  if (!cfg_.context) throw VariantError("posterior_c_top: model has no context latent");
  if (!feat.valid() || feat.rows() < 1) throw ContractError("posterior_c_top: empty set");
  const std::string p = layer_name("qc", cfg_.layers);
  Var e = ad::elu(conv(g, feat, p + ".embed", true));
  return head(g, p, pool(g, p, e, group));
}

GaussianVars NeuralModel::posterior_c(Graph& g, int layer, const Var& c_above, const Var& z_above, const Var& feat,
                                      int group) {
  if (cfg_.variant != Variant::hfsgm || !cfg_.context) {
    throw VariantError("posterior_c: only hfsgm has a context latent below the top layer");
  }
  if (layer < 1 || layer >= cfg_.layers) throw ContractError("posterior_c: layer out of range");
  const std::string p = layer_name("qc", layer);
  Var pre = sum_all({conv(g, feat, p + ".fh"), conv(g, z_above, p + ".fz"),
                     ad::repeat_rows(conv(g, c_above, p + ".fc"), group)});
  Var e = ad::elu(ad::add(pre, bias_like(g, p + ".b", pre.rows())));
  return head(g, p, pool(g, p, e, group));
}

GaussianVars NeuralModel::prior_c(Graph& g, int layer, const Var& c_above, const Var& z_above, int group) {
  if (cfg_.variant != Variant::hfsgm || !cfg_.context) {
    throw VariantError("prior_c: only hfsgm has a context latent below the top layer");
  }
  if (layer < 1 || layer >= cfg_.layers) throw ContractError("prior_c: layer out of range");
  const std::string p = layer_name("pc", layer);
  Var pre = ad::add(conv(g, z_above, p + ".fz"), ad::repeat_rows(conv(g, c_above, p + ".fc"), group));
  Var e = ad::elu(ad::add(pre, bias_like(g, p + ".b", pre.rows())));
  return head(g, p, pool(g, p, e, group));
}

GaussianVars NeuralModel::posterior_z(Graph& g, int layer, const Var& z_above, const Var& c, const Var& feat,
                                      int group) {
  const std::string p = layer_name("qz", layer);
  if (layer < cfg_.layers && !z_above.valid()) throw ContractError("posterior_z: missing latent from the layer above");
  std::vector<Var> terms{conv(g, feat, p + ".fx")};
  if (layer < cfg_.layers) terms.push_back(conv(g, z_above, p + ".fz"));
  if (cfg_.context) terms.push_back(ad::repeat_rows(conv(g, c, p + ".fc"), group));
  Var pre = sum_all(terms);
  return head(g, p, ad::elu(ad::add(pre, bias_like(g, p + ".b", pre.rows()))));
}

GaussianVars NeuralModel::prior_z(Graph& g, int layer, const Var& z_above, const Var& c, int rows, int group) {
  const std::string p = layer_name("pz", layer);
  if (layer < cfg_.layers && !z_above.valid()) throw ContractError("prior_z: missing latent from the layer above");
  std::vector<Var> terms{bias_like(g, p + ".b", rows)};
  if (layer < cfg_.layers) terms.push_back(conv(g, z_above, p + ".fz"));
  if (cfg_.context) terms.push_back(ad::repeat_rows(conv(g, c, p + ".fc"), group));
  return head(g, p, ad::elu(sum_all(terms)));
}

Var NeuralModel::decode(Graph& g, const std::vector<Var>& z, const std::vector<Var>& c, int group) {
  const int L = cfg_.layers;
  if (static_cast<int>(z.size()) != L || static_cast<int>(c.size()) != L) {
    throw ContractError("decode: expected " + std::to_string(L) + " latent layers");
  }
  for (const Var& zl : z) {
    if (!zl.valid()) throw ContractError("decode: missing latent layer");
  }
  const int rows = z.front().rows();
  // Distinct contexts: every layer for hfsgm, the top one otherwise.
  std::vector<std::pair<int, Var>> contexts;
  if (cfg_.context) {
    for (int l = 1; l <= L; ++l) {
      if (cfg_.variant != Variant::hfsgm && l != L) continue;
      if (!c[static_cast<std::size_t>(l) - 1].valid()) throw ContractError("decode: missing context latent");
      contexts.emplace_back(l, c[static_cast<std::size_t>(l) - 1]);
    }
  }

  std::vector<Var> terms{bias_like(g, "dec.b", rows)};
  for (int l = 1; l <= L; ++l) terms.push_back(conv(g, z[static_cast<std::size_t>(l) - 1], layer_name("dec.z", l)));
  for (const auto& [l, cl] : contexts) terms.push_back(ad::repeat_rows(conv(g, cl, layer_name("dec.c", l)), group));
  Var x = ad::elu(sum_all(terms));

  const auto hs = cfg_.trunk_heights();
  const auto ws = cfg_.trunk_widths();
  const int stages = static_cast<int>(cfg_.encoder_widths.size());
  const int r = cfg_.latent_resolution;
  if (r == 1) {
    x = ad::elu(ad::linear(flatten(x), g.bind("dec.dense.w"), g.bind("dec.dense.b")));
    x = ad::reshape(x, {rows, cfg_.encoder_widths.back(), hs.back(), ws.back()});
  } else if (r < hs.back()) {
    x = ad::upsample_nearest(x, hs.back() / r);
  }
  x = residual(g, "dec.res", x);
  for (int i = stages - 1; i >= 0; --i) {
    const std::string p = "dec.up" + std::to_string(i);
    x = ad::conv_transpose2d(x, g.bind(p + ".w"), g.bind(p + ".b"), 2, 1, hs[static_cast<std::size_t>(i)],
                             ws[static_cast<std::size_t>(i)]);
    // Context bias after normalization, so batch statistics see only the content path.
    if (i > 0) x = norm(g, p + ".bn", x);
    std::vector<Var> shift;
    for (const auto& [l, cl] : contexts) shift.push_back(ad::linear(flatten(cl), g.bind(p + layer_name(".c", l)), Var()));
    if (!shift.empty()) x = ad::add_channel_bias(x, ad::repeat_rows(sum_all(shift), group));
    if (i > 0) x = ad::elu(x);
  }
  return x;
}

// ------------------------------------------------------------- passes

PassVars NeuralModel::run(Graph& g, const Var& feat, int sets, int group, const PassPlan& plan, NoiseSource& noise) {
  const int L = cfg_.layers;
  if (sets < 1 || group < 1) throw ContractError("run: empty batch");
  const bool needs_feat = plan.posterior_z_layers > 0 || (plan.posterior_c_layers > 0 && !plan.top_context);
  if (needs_feat && (!feat.valid() || feat.rows() != sets * group)) {
    throw ContractError("run: posterior layers need features for every element");
  }
  PassVars pass;
  pass.sets = sets;
  pass.group = group;
  pass.layers.resize(static_cast<std::size_t>(L));
  const int rows = sets * group;

  for (int l = L; l >= 1; --l) {
    LayerVars& cur = pass.layers[static_cast<std::size_t>(l) - 1];
    const LayerVars* above = l < L ? &pass.layers[static_cast<std::size_t>(l)] : nullptr;
    const int depth = L - l;  // 0 at the top
    if (cfg_.context) {
      if (l == L) {
        cur.pc = standard_normal(g, sets, cfg_.c_size());
        if (plan.top_context) {
          cur.qc = *plan.top_context;
        } else if (plan.posterior_c_layers > 0) {
          cur.qc = posterior_c_top(g, feat, group);
        }
        cur.c = draw(cur.qc.valid() ? cur.qc : cur.pc, NoiseSite::Kind::context, l, sets, group, noise);
        cur.owns_c = true;
      } else if (cfg_.variant == Variant::hfsgm) {
        cur.pc = prior_c(g, l, above->c, above->z, group);
        if (depth < plan.posterior_c_layers) cur.qc = posterior_c(g, l, above->c, above->z, feat, group);
        cur.c = draw(cur.qc.valid() ? cur.qc : cur.pc, NoiseSite::Kind::context, l, sets, group, noise);
        cur.owns_c = true;
      } else {
        cur.c = above->c;
      }
    }
    const Var z_above = above ? above->z : Var();
    cur.pz = prior_z(g, l, z_above, cur.c, rows, group);
    if (depth < plan.posterior_z_layers) cur.qz = posterior_z(g, l, z_above, cur.c, feat, group);
    cur.z = draw(cur.qz.valid() ? cur.qz : cur.pz, NoiseSite::Kind::sample, l, sets, group, noise);
  }

  if (plan.decode) {
    std::vector<Var> zs, cs;
    for (const auto& layer : pass.layers) {
      zs.push_back(layer.z);
      cs.push_back(layer.c);
    }
    pass.logits = decode(g, zs, cs, group);
  }
  return pass;
}

LatentState NeuralModel::infer(const SetData& x, NoiseSource& noise) {
  Graph g(store_, false, false);
  Var feat = features(g, encode_trunk(g, stack({&x})));
  PassPlan plan{cfg_.layers, cfg_.layers, nullptr, false};
  return extract(run(g, feat, 1, x.size, plan, noise));
}

LatentState extract(const PassVars& pass) {
  auto gaussian = [](const GaussianVars& v) -> std::optional<DiagGaussian> {
    if (!v.valid()) return std::nullopt;
    return DiagGaussian(v.mean.value(), v.log_var.value());
  };
  LatentState s;
  s.sets = pass.sets;
  s.group = pass.group;
  for (const auto& l : pass.layers) {
    LayerState out;
    if (l.c.valid()) out.c = l.c.value();
    out.owns_c = l.owns_c;
    if (l.owns_c) {
      out.qc = gaussian(l.qc);
      out.pc = gaussian(l.pc);
    }
    out.z = l.z.value();
    out.qz = gaussian(l.qz);
    out.pz = *gaussian(l.pz);
    s.layers.push_back(std::move(out));
  }
  return s;
}

}  // namespace hfsgm
