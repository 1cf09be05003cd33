// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggregation.hpp"
#include "json.hpp"
#include "params.hpp"

namespace hfsgm {

enum class Variant { bns, ns, hfsgm };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::hfsgm;
  Aggregator aggregator = Aggregator::lag;
  int layers = 3;
  int c_channels = 64;
  int z_channels = 32;
  int latent_resolution = 4;
  std::vector<int> encoder_widths{64, 64, 64};
  int hidden_channels = 64;
  // Residual blocks at the trunk resolution, in both encoder and decoder.
  int residual_blocks = 0;
  int heads = 4;
  int image_height = 28;
  int image_width = 28;
  bool batch_norm = true;
  // false removes the context latent entirely (plain hierarchical VAE).
  bool context = true;
  bool lag_residual = false;
  bool canonical_order = true;
  InitMode init = InitMode::standard;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Spatial sizes through the encoder, input first: 28, 14, 7, 4.
  std::vector<int> trunk_heights() const;
  std::vector<int> trunk_widths() const;
  int trunk_resolution() const;
  /// 3x3 heads on spatial latents, 1x1 on dense ones.
  int head_kernel() const { return latent_resolution > 1 ? 3 : 1; }
  /// Channels of the per-element features fed to the latent heads.
  int feature_channels() const;
  std::size_t c_size() const;
  std::size_t z_size() const;
  /// Number of distinct context latents.
  int context_layers() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace hfsgm
