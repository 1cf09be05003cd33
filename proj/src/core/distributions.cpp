// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "distributions.hpp"

#include "errors.hpp"

namespace hfsgm {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
}

}  // namespace

DiagGaussian::DiagGaussian(Tensor mean, Tensor log_var)
    : mean_(std::move(mean)), log_var_(std::move(log_var)) {
  if (mean_.shape() != log_var_.shape()) {
    throw ContractError("DiagGaussian: mean shape " + shape_str(mean_.shape()) +
                        " != log_var shape " + shape_str(log_var_.shape()));
  }
  for (double& v : log_var_.data()) v = clamp_log_var(v);
}

DiagGaussian DiagGaussian::standard(const Shape& shape) {
  return DiagGaussian(Tensor(shape, 0.0), Tensor(shape, 0.0));
}

BernoulliImage::BernoulliImage(Tensor logits) : logits_(std::move(logits)) {
  for (double l : logits_.data()) {
    if (!std::isfinite(l)) throw ContractError("BernoulliImage: non-finite logit");
  }
}

Tensor BernoulliImage::probabilities() const {
  Tensor p(logits_.shape());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits_[i]);
  return p;
}

Tensor rsample(const DiagGaussian& dist, const Tensor& noise) {
  require_same(dist.size(), noise.size(), "rsample");
  Tensor out(dist.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = dist.mean()[i] + std::exp(0.5 * dist.log_var()[i]) * noise[i];
  }
  return out;
}

Tensor rsample(const DiagGaussian& dist, Rng& rng) {
  Tensor noise(dist.shape());
  rng.fill_normal(noise.data());
  return rsample(dist, noise);
}

double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  require_same(q.size(), p.size(), "kl_diag_gaussian");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    total += kl_term(q.mean()[i], q.log_var()[i], p.mean()[i], p.log_var()[i]);
  }
  return total;
}

double gaussian_log_prob(const DiagGaussian& dist, std::span<const double> x) {
  require_same(dist.size(), x.size(), "gaussian_log_prob");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += gaussian_term(x[i], dist.mean()[i], dist.log_var()[i]);
  }
  return total;
}

double bernoulli_log_prob(const BernoulliImage& dist, std::span<const double> x) {
  require_same(dist.logits().size(), x.size(), "bernoulli_log_prob");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0 && x[i] != 1.0) {
      throw ContractError("bernoulli_log_prob: non-binary value " + std::to_string(x[i]) +
                          " at index " + std::to_string(i));
    }
    total += bernoulli_logit_term(dist.logits()[i], x[i]);
  }
  return total;
}

}  // namespace hfsgm
