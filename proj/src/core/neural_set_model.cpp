// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "neural_set_model.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "ops.hpp"

namespace hfsgm {

using ad::Var;

const char* refine_mode_name(RefineMode m) { return m == RefineMode::posterior ? "posterior" : "mixed"; }

RefineMode parse_refine_mode(const std::string& name) {
  if (name == "posterior") return RefineMode::posterior;
  if (name == "mixed") return RefineMode::mixed;
  throw ConfigError("unknown refine mode '" + name + "'; valid: posterior, mixed");
}

namespace {

void require_nonempty(const SetData& x, const char* op) {
  if (x.size < 1) throw ContractError(std::string(op) + ": empty set");
}

/// Copies logits rows into `out` starting at `row`, drawing binary pixels.
void emit(const Tensor& logits, int first, Generated& out, int row, Rng& rng) {
  const int rows = logits.rows();
  for (int r = first; r < rows; ++r, ++row) {
    auto src = logits.row(r);
    auto mean = out.means.row(row);
    auto draw = out.samples.row(row);
    for (std::size_t i = 0; i < src.size(); ++i) {
      mean[i] = sigmoid(src[i]);
      draw[i] = rng.bernoulli(mean[i]) ? 1.0 : 0.0;
    }
  }
}

Generated blank(int n, int dim) { return {SetData(n, dim), SetData(n, dim)}; }

Tensor tile(const Tensor& images, int times) {
  Shape s = images.shape();
  s[0] *= times;
  Tensor out(s);
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  for (int t = 0; t < times; ++t) std::copy(images.data().begin(), images.data().end(), out.data().begin() + t * n);
  return out;
}

}  // namespace

int NeuralSetModel::observation_dim() const {
  return model_.config().image_height * model_.config().image_width;
}

GaussianVars NeuralSetModel::top_posterior(Graph& g, const SetData& x) {
  Var feat = model_.features(g, model_.encode_trunk(g, model_.stack({&x})));
  return model_.posterior_c_top(g, feat, x.size);
}

std::vector<ElboTerms> NeuralSetModel::elbo(const std::vector<const SetData*>& sets, Rng& rng) {
  if (sets.empty()) return {};
  const int s = sets.front()->size;
  if (s < 1) throw ContractError("elbo: empty set");
  const int L = model_.config().layers;
  const int per_chunk = std::max(1, max_rows_ / s);
  std::vector<ElboTerms> out;
  RngNoise noise(rng);
  for (std::size_t begin = 0; begin < sets.size(); begin += static_cast<std::size_t>(per_chunk)) {
    const std::size_t end = std::min(sets.size(), begin + static_cast<std::size_t>(per_chunk));
    std::vector<const SetData*> chunk(sets.begin() + static_cast<std::ptrdiff_t>(begin),
                                      sets.begin() + static_cast<std::ptrdiff_t>(end));
    Graph g(model_.params(), false, false);
    const Tensor images = model_.stack(chunk);
    Var feat = model_.features(g, model_.encode_trunk(g, images));
    PassVars pass = model_.run(g, feat, static_cast<int>(chunk.size()), s, {L, L, nullptr, true}, noise);
    auto terms = to_terms(elbo_vars(pass, images), s);
    out.insert(out.end(), terms.begin(), terms.end());
  }
  return out;
}

std::vector<double> NeuralSetModel::log_weights(const SetData& x, int draws, Rng& rng) {
  require_nonempty(x, "log_weights");
  if (draws < 1) throw ContractError("log_weights: need at least one importance sample");
  const int L = model_.config().layers;
  const int per_chunk = std::max(1, max_rows_ / x.size);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(draws));
  RngNoise noise(rng);
  const Tensor images = model_.stack({&x});
  for (int done = 0; done < draws; done += per_chunk) {
    const int t = std::min(per_chunk, draws - done);
    Graph g(model_.params(), false, false);
    Var feat_one = model_.features(g, model_.encode_trunk(g, images));
    std::vector<int> idx;
    for (int k = 0; k < t; ++k)
      for (int s = 0; s < x.size; ++s) idx.push_back(s);
    Var feat = ad::gather_rows(feat_one, idx);
    PassVars pass = model_.run(g, feat, t, x.size, {L, L, nullptr, true}, noise);
    const Tensor lw = log_weight_vars(pass, tile(images, t)).value();
    out.insert(out.end(), lw.data().begin(), lw.data().end());
  }
  return out;
}

Generated NeuralSetModel::sample_unconditional(int n, Rng& rng) {
  if (n < 0) throw ContractError("sample_unconditional: negative count");
  Generated out = blank(n, observation_dim());
  RngNoise noise(rng);
  for (int done = 0; done < n; done += max_rows_) {
    const int t = std::min(max_rows_, n - done);
    Graph g(model_.params(), false, false);
    PassVars pass = model_.run(g, Var(), t, 1, {0, 0, nullptr, true}, noise);
    emit(pass.logits.value(), 0, out, done, rng);
  }
  return out;
}

Generated NeuralSetModel::sample_conditional(const SetData& x, Rng& rng) {
  require_nonempty(x, "sample_conditional");
  Generated out = blank(1, observation_dim());
  RngNoise noise(rng);
  Graph g(model_.params(), false, false);
  if (!model_.config().context) {
    PassVars pass = model_.run(g, Var(), 1, 1, {0, 0, nullptr, true}, noise);
    emit(pass.logits.value(), 0, out, 0, rng);
    return out;
  }
  GaussianVars q = top_posterior(g, x);
  PassVars pass = model_.run(g, Var(), 1, 1, {1, 0, &q, true}, noise);
  emit(pass.logits.value(), 0, out, 0, rng);
  return out;
}

Generated NeuralSetModel::reconstruct(const SetData& x, RefineMode mode, Rng& rng) {
  require_nonempty(x, "reconstruct");
  const int L = model_.config().layers;
  const int depth = mode == RefineMode::posterior ? L : 1;
  Generated out = blank(x.size, observation_dim());
  RngNoise noise(rng);
  Graph g(model_.params(), false, false);
  Var feat = model_.features(g, model_.encode_trunk(g, model_.stack({&x})));
  PassVars pass = model_.run(g, feat, 1, x.size, {depth, depth, nullptr, true}, noise);
  emit(pass.logits.value(), 0, out, 0, rng);
  return out;
}

double NeuralSetModel::predictive_log_likelihood(const SetData& context, std::span<const double> x, int draws,
                                                 Rng& rng) {
  require_nonempty(context, "predictive_log_likelihood");
  if (draws < 1) throw ContractError("predictive_log_likelihood: need at least one draw");
  if (static_cast<int>(x.size()) != observation_dim()) throw ContractError("predictive_log_likelihood: bad observation size");
  SetData single(1, observation_dim());
  std::copy(x.begin(), x.end(), single.values.begin());
  const Tensor target = model_.stack({&single});
  RngNoise noise(rng);
  double total = 0.0;
  for (int done = 0; done < draws; done += max_rows_) {
    const int t = std::min(max_rows_, draws - done);
    Graph g(model_.params(), false, false);
    PassVars pass;
    if (model_.config().context) {
      GaussianVars q = top_posterior(g, context);
      GaussianVars rep{ad::repeat_rows(q.mean, t), ad::repeat_rows(q.log_var, t)};
      pass = model_.run(g, Var(), t, 1, {1, 0, &rep, true}, noise);
    } else {
      pass = model_.run(g, Var(), t, 1, {0, 0, nullptr, true}, noise);
    }
    const Tensor ll = ad::bernoulli_rows(pass.logits, tile(target, t)).value();
    for (double v : ll.data()) total += v;
  }
  return total / draws;
}

double NeuralSetModel::context_divergence(const SetData& a, const SetData& b) {
  require_nonempty(a, "context_divergence");
  require_nonempty(b, "context_divergence");
  Graph g(model_.params(), false, false);
  GaussianVars qa = top_posterior(g, a);
  GaussianVars qb = top_posterior(g, b);
  return kl_diag_gaussian(DiagGaussian(qa.mean.value(), qa.log_var.value()),
                          DiagGaussian(qb.mean.value(), qb.log_var.value()));
}

}  // namespace hfsgm
