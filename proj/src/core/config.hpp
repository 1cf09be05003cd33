// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "episodes.hpp"
#include "model_config.hpp"
#include "set_model.hpp"

namespace hfsgm {

struct DataConfig {
  std::string source = "strokes";  // strokes | directory | packed
  std::string root;                // dataset path for directory/packed sources
  StrokeDatasetOptions strokes;
  SplitCounts splits{60, 20, 20};
  std::uint64_t split_seed = 0;
  BinarizeMode binarize = BinarizeMode::dynamic;
};

struct TrainConfig {
  int epochs = 400;
  int batch_size = 100;  // sets per minibatch
  int set_size = 5;
  int episodes_per_epoch = 0;  // 0: one episode per training class
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double alpha = 1.0;
  double alpha_step = 0.98;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  int val_episodes = 100;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::string split = "test";
  int set_size = 5;
  int episodes = 100;
  int importance_samples = 1000;
  int elbo_draws = 1;  // bound draws averaged per episode
  std::vector<int> sweep_sizes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  int sweep_episodes = 50;
  int predictive_draws = 100;
  int refine_iters = 20;
  RefineMode refine_mode = RefineMode::posterior;
  bool refine_hard = false;
  int sample_count = 16;
  int classify_classes = 10;
  int classify_set_size = 5;
  int classify_trials = 100;
  bool kl_argmin = false;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  std::string out_dir = "runs/default";
};

/// "full" (full-size training setup) or "toy" (desk-scale).
RunConfig preset(const std::string& name);

/// Parses a JSON config. An optional top-level "preset" key selects the
/// starting point; section keys override it. Unknown keys are errors.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Loads or synthesizes the dataset at height x width (box-resized when the
/// source differs). `root_fallback` is used when the config names no root.
ClassIndexedDataset load_data(const DataConfig& cfg, int height, int width, const std::string& root_fallback = "");

}  // namespace hfsgm
