// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"

namespace hfsgm {

/// Named parameter arrays plus their gradient accumulators. Non-trainable
/// entries (normalization running statistics) are buffers: persisted in
/// checkpoints but never bound for gradients.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor init, bool trainable = true);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  bool trainable(const std::string& name) const;

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void zero_grad();
  std::size_t trainable_count() const;

 private:
  std::map<std::string, Entry> entries_;
};

/// Binds parameters of a store onto a tape. With gradients enabled each
/// trainable parameter becomes a leaf whose gradient flows into the store.
class Binder {
 public:
  Binder(ad::Tape& tape, ParamStore& store, bool with_grad) : tape_(tape), store_(store), with_grad_(with_grad) {}

  ad::Var operator()(const std::string& name);
  /// Invalid Var when the parameter does not exist.
  ad::Var optional(const std::string& name);
  Tensor& buffer(const std::string& name) { return store_.value(name); }

  ad::Tape& tape() { return tape_; }
  ParamStore& store() { return store_; }

 private:
  ad::Tape& tape_;
  ParamStore& store_;
  bool with_grad_;
};

/// Weight initialization policy.
enum class InitMode {
  standard,  // N(0, 1/fan_in) weights, zero biases, zero output heads
  zeros,     // every parameter zero
};

/// Fills weights of a declared layer.
class Initializer {
 public:
  Initializer(InitMode mode, std::uint64_t seed) : mode_(mode), rng_(seed) {}

  Tensor weight(Shape shape, int fan_in);
  Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  Tensor ones(Shape shape) { return Tensor(std::move(shape), mode_ == InitMode::zeros ? 0.0 : 1.0); }
  InitMode mode() const { return mode_; }

 private:
  InitMode mode_;
  Rng rng_;
};

}  // namespace hfsgm
