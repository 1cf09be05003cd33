// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "autodiff.hpp"

#include "errors.hpp"

namespace hfsgm::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("scalar() on tensor of shape " + shape_str(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(const Tensor& value, Tensor* grad_sink) {
  if (auto it = bound_.find(&value); it != bound_.end()) return Var(this, it->second);
  nodes_.push_back(Node{value, {}, grad_sink != nullptr, {}, grad_sink});
  const int id = static_cast<int>(nodes_.size() - 1);
  bound_.emplace(&value, id);
  return Var(this, id);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward fn) {
  return record(std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ContractError("operands recorded on different tapes");
    needs = needs || requires_grad(p.id());
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : Backward{}, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(const Var& root, double seed) {
  if (root.value().size() != 1) {
    throw ContractError("backward() requires a scalar root, got " + shape_str(root.shape()));
  }
  grad(root.id())[0] += seed;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.sink != nullptr) {
      Tensor& sink = *n.sink;
      if (sink.shape() != n.value.shape()) sink = Tensor(n.value.shape(), 0.0);
      for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += n.grad[i];
    }
  }
}

}  // namespace hfsgm::ad
