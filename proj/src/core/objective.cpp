// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "objective.hpp"

#include "errors.hpp"
#include "ops.hpp"

namespace hfsgm {

using ad::Var;

double ElboTerms::kl_total() const {
  double s = 0.0;
  for (double v : kl_z) s += v;
  for (double v : kl_c) s += v;
  return s;
}

double ElboTerms::elbo() const { return rec - kl_total(); }

AnnealState anneal(const AnnealState& state) {
  if (state.alpha_step <= 0.0 || state.alpha_step >= 1.0) throw ConfigError("alpha_step must lie in (0, 1)");
  return {state.alpha * state.alpha_step, state.alpha_step};
}

double weighted_loss(const ElboTerms& terms, double alpha) {
  if (!(alpha >= 0.0)) throw ContractError("weighted_loss: alpha must be nonnegative");
  if (terms.set_size < 1) throw ContractError("weighted_loss: set size must be >= 1");
  const double w = 1.0 + alpha;
  return (w * -terms.rec + terms.kl_total() / w) / terms.set_size;
}

double batch_loss(const std::vector<ElboTerms>& terms, double alpha) {
  if (terms.empty()) throw ContractError("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& t : terms) {
    if (t.set_size != terms.front().set_size) throw ContractError("batch_loss: mixed set sizes in one batch");
    total += weighted_loss(t, alpha);
  }
  return total / static_cast<double>(terms.size());
}

ElboVars elbo_vars(const PassVars& pass, const Tensor& targets) {
  if (!pass.logits.valid()) throw ContractError("elbo: pass was not decoded");
  ElboVars out;
  out.rec = ad::group_sum(ad::bernoulli_rows(pass.logits, targets), pass.group);
  for (const auto& l : pass.layers) {
    if (!l.qz.valid()) throw VariantError("elbo: pass lacks a posterior for every sample latent");
    out.kl_z.push_back(ad::group_sum(ad::kl_rows(l.qz.mean, l.qz.log_var, l.pz.mean, l.pz.log_var), pass.group));
    if (l.owns_c) {
      if (!l.qc.valid()) throw VariantError("elbo: pass lacks a posterior for a context latent");
      out.kl_c.push_back(ad::kl_rows(l.qc.mean, l.qc.log_var, l.pc.mean, l.pc.log_var));
    }
  }
  return out;
}

Var weighted_loss_var(const ElboVars& terms, double alpha, int set_size) {
  if (!(alpha >= 0.0)) throw ContractError("weighted_loss: alpha must be nonnegative");
  const double w = 1.0 + alpha;
  Var kl;
  for (const auto* list : {&terms.kl_z, &terms.kl_c}) {
    for (const Var& v : *list) kl = kl.valid() ? ad::add(kl, v) : v;
  }
  Var per_set = ad::scale(terms.rec, -w);
  if (kl.valid()) per_set = ad::add(per_set, ad::scale(kl, 1.0 / w));
  const int sets = terms.rec.rows();
  return ad::scale(ad::sum(per_set), 1.0 / (static_cast<double>(set_size) * sets));
}

std::vector<ElboTerms> to_terms(const ElboVars& terms, int set_size) {
  const int sets = terms.rec.rows();
  std::vector<ElboTerms> out(static_cast<std::size_t>(sets));
  for (int t = 0; t < sets; ++t) {
    auto& e = out[static_cast<std::size_t>(t)];
    const auto i = static_cast<std::size_t>(t);
    e.rec = terms.rec.value()[i];
    for (const Var& v : terms.kl_z) e.kl_z.push_back(v.value()[i]);
    for (const Var& v : terms.kl_c) e.kl_c.push_back(v.value()[i]);
    e.set_size = set_size;
  }
  return out;
}

Var log_weight_vars(const PassVars& pass, const Tensor& targets) {
  if (!pass.logits.valid()) throw ContractError("log_weights: pass was not decoded");
  Var total = ad::group_sum(ad::bernoulli_rows(pass.logits, targets), pass.group);
  for (const auto& l : pass.layers) {
    if (!l.qz.valid()) throw VariantError("log_weights: pass lacks a posterior for every sample latent");
    Var dz = ad::sub(ad::gaussian_rows(l.z, l.pz.mean, l.pz.log_var), ad::gaussian_rows(l.z, l.qz.mean, l.qz.log_var));
    total = ad::add(total, ad::group_sum(dz, pass.group));
    if (l.owns_c) {
      total = ad::add(total, ad::sub(ad::gaussian_rows(l.c, l.pc.mean, l.pc.log_var),
                                     ad::gaussian_rows(l.c, l.qc.mean, l.qc.log_var)));
    }
  }
  return total;
}

}  // namespace hfsgm
