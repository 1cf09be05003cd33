// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Whole-run operations behind the C interface.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "config.hpp"

namespace hfsgm {

struct CommandOptions {
  std::string config_path;  // empty: toy preset
  std::string checkpoint;
  std::string out;          // empty: config out_dir
  std::string data_root;    // fallback when data.root is empty
  std::optional<std::uint64_t> seed;
  std::optional<int> set_size;
  std::optional<int> importance_samples;
  std::optional<int> iters;
  std::string mode;
  std::string method;
  std::string split;
  std::function<void(const std::string&)> log;
};

/// Config with command-line overrides applied.
RunConfig resolve_config(const CommandOptions& opts);

void cmd_train(const CommandOptions& opts);
void cmd_eval(const CommandOptions& opts);
void cmd_sample(const CommandOptions& opts);
void cmd_sweep(const CommandOptions& opts);
void cmd_classify(const CommandOptions& opts);
/// Throws VerificationError when any check fails.
void cmd_oracle_check(const CommandOptions& opts);

}  // namespace hfsgm
