// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "params.hpp"

#include <cmath>

#include "errors.hpp"

namespace hfsgm {

Tensor& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (entries_.count(name)) throw ContractError("parameter '" + name + "' declared twice");
  Entry& e = entries_[name];
  e.value = std::move(init);
  e.trainable = trainable;
  return e.value;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  Entry& e = it->second;
  if (e.grad.shape() != e.value.shape()) e.grad = Tensor(e.value.shape(), 0.0);
  return e.grad;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  return it != entries_.end() && it->second.trainable;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) {
    if (e.grad.shape() != e.value.shape()) {
      e.grad = Tensor(e.value.shape(), 0.0);
    } else {
      e.grad.fill(0.0);
    }
  }
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (e.trainable) n += e.value.size();
  }
  return n;
}

ad::Var Binder::operator()(const std::string& name) {
  auto& entries = store_.entries();
  auto it = entries.find(name);
  if (it == entries.end()) throw ContractError("unknown parameter '" + name + "'");
  Tensor* sink = (with_grad_ && it->second.trainable) ? &store_.grad(name) : nullptr;
  return tape_.parameter(it->second.value, sink);
}

ad::Var Binder::optional(const std::string& name) {
  if (!store_.contains(name)) return {};
  return (*this)(name);
}

Tensor Initializer::weight(Shape shape, int fan_in) {
  Tensor t(std::move(shape), 0.0);
  if (mode_ == InitMode::zeros) return t;
  const double sd = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  for (double& v : t.data()) v = sd * rng_.normal();
  return t;
}

}  // namespace hfsgm
