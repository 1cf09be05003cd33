// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "rng.hpp"

namespace hfsgm {

/// Identifies one standard-normal draw of a latent slab.
struct NoiseSite {
  enum class Kind { context, sample };
  Kind kind = Kind::sample;
  int layer = 0;    // 1 = nearest the data
  int set = 0;
  int element = -1;  // -1 for per-set draws
};

/// Supplies reparameterization noise. Draws are requested in a fixed order
/// (top layer first, sets then elements), so a sequential source is
/// reproducible from its seed.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual void fill(const NoiseSite& site, std::span<double> out) = 0;
};

class RngNoise final : public NoiseSource {
 public:
  explicit RngNoise(Rng& rng) : rng_(rng) {}
  void fill(const NoiseSite&, std::span<double> out) override { rng_.fill_normal(out); }

 private:
  Rng& rng_;
};

}  // namespace hfsgm
