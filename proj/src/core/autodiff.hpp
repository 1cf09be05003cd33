// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Tape-based reverse-mode differentiation over small dense tensors.
//
// A Tape records every operation applied to Vars in construction order.
// Calling backward() on a scalar walks the tape once in reverse and
// accumulates gradients; parameter nodes flush their gradient into the
// caller-owned sink tensor they were bound to.

#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <vector>

#include "tensor.hpp"

namespace hfsgm::ad {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  int rank() const { return value().rank(); }
  int rows() const { return value().rows(); }
  std::size_t row_size() const { return value().row_size(); }
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  /// Leaf bound to a caller-owned tensor. backward() adds the gradient into
  /// `grad_sink` (if non-null). Repeated binding of the same tensor returns
  /// the same node.
  Var parameter(const Tensor& value, Tensor* grad_sink);

  /// Append an operation result. `fn` is invoked during backward with the
  /// gradient of this node; it must accumulate into parent gradients.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward fn);
  Var record(Tensor value, const std::vector<Var>& parents, Backward fn);

  /// Id the next recorded node will receive.
  int next_id() const { return static_cast<int>(nodes_.size()); }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool requires_grad(const Var& v) const { return requires_grad(v.id()); }

  /// Gradient accumulator for a node, zero-allocated on first access.
  Tensor& grad(int id);
  Tensor& grad(const Var& v) { return grad(v.id()); }

  /// Reverse sweep from a scalar root with d(root)/d(root) = seed.
  void backward(const Var& root, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
    Tensor* sink = nullptr;
  };
  std::deque<Node> nodes_;
  std::map<const Tensor*, int> bound_;
};

}  // namespace hfsgm::ad
