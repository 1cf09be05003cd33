// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "set_model.hpp"

namespace hfsgm {

struct RefineOptions {
  int iters = 20;
  RefineMode mode = RefineMode::posterior;
  bool hard = false;  // propagate the emitted sample instead of the mean
};

/// Frame k holds x after k refinement steps; frame 0 is the conditional draw.
struct Trajectory {
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<double>> means;

  int frames() const { return static_cast<int>(samples.size()); }
  const std::vector<double>& final_sample() const { return samples.back(); }
};

/// Conditional draw from X, then `iters` passes that append x to X, infer
/// latents on the augmented set and redraw x. X itself is never changed.
Trajectory sample_refined(SetModel& model, const SetData& x, const RefineOptions& opts, Rng& rng);

struct DumpEntry {
  std::string file;
  std::string class_id;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::string kind;
};

/// Writes each image as a binary PGM (values scaled to 0..255) under `dir`
/// and appends its entry to dir/manifest.csv.
void dump_images(const std::filesystem::path& dir, int height, int width,
                 const std::vector<std::vector<double>>& images, const std::vector<DumpEntry>& entries);

}  // namespace hfsgm
