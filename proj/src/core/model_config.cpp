// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "model_config.hpp"

#include <algorithm>

#include "errors.hpp"

namespace hfsgm {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::bns: return "bns";
    case Variant::ns: return "ns";
    case Variant::hfsgm: return "hfsgm";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "bns" || name == "bNS") return Variant::bns;
  if (name == "ns" || name == "NS") return Variant::ns;
  if (name == "hfsgm" || name == "HFSGM") return Variant::hfsgm;
  throw ConfigError("unknown variant '" + name + "'; valid: bns, ns, hfsgm");
}

namespace {

int halve(int n) { return (n - 1) / 2 + 1; }

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("model." + field + ": " + why);
}

}  // namespace

std::vector<int> ModelConfig::trunk_heights() const {
  std::vector<int> s{image_height};
  for (std::size_t i = 0; i < encoder_widths.size(); ++i) s.push_back(halve(s.back()));
  return s;
}

std::vector<int> ModelConfig::trunk_widths() const {
  std::vector<int> s{image_width};
  for (std::size_t i = 0; i < encoder_widths.size(); ++i) s.push_back(halve(s.back()));
  return s;
}

int ModelConfig::trunk_resolution() const { return trunk_heights().back(); }

int ModelConfig::feature_channels() const {
  return latent_resolution == 1 ? hidden_channels : encoder_widths.back();
}

std::size_t ModelConfig::c_size() const {
  return static_cast<std::size_t>(c_channels) * latent_resolution * latent_resolution;
}

std::size_t ModelConfig::z_size() const {
  return static_cast<std::size_t>(z_channels) * latent_resolution * latent_resolution;
}

int ModelConfig::context_layers() const {
  if (!context) return 0;
  return variant == Variant::hfsgm ? layers : 1;
}

void ModelConfig::validate() const {
  require(layers >= 1, "layers", "must be >= 1");
  require(variant != Variant::bns || layers == 1, "layers", "bns has exactly one stochastic layer");
  require(c_channels >= 1, "c_channels", "must be >= 1");
  require(z_channels >= 1, "z_channels", "must be >= 1");
  require(hidden_channels >= 1, "hidden_channels", "must be >= 1");
  require(heads >= 1, "heads", "must be >= 1");
  require(residual_blocks >= 0, "residual_blocks", "must be >= 0");
  require(image_height >= 1 && image_width >= 1, "image_height", "image must be nonempty");
  require(!encoder_widths.empty(), "encoder_widths", "needs at least one stage");
  for (int w : encoder_widths) require(w >= 1, "encoder_widths", "widths must be >= 1");
  const int rt = trunk_resolution();
  require(latent_resolution >= 1, "latent_resolution", "must be >= 1");
  if (latent_resolution > 1) {
    require(trunk_widths().back() == rt, "latent_resolution", "spatial latents need a square trunk output");
    require(rt % latent_resolution == 0, "latent_resolution",
            std::to_string(latent_resolution) + " does not divide the encoder output resolution " +
                std::to_string(rt));
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"aggregator", aggregator_name(c.aggregator)},
          {"layers", c.layers},
          {"c_channels", c.c_channels},
          {"z_channels", c.z_channels},
          {"latent_resolution", c.latent_resolution},
          {"encoder_widths", c.encoder_widths},
          {"hidden_channels", c.hidden_channels},
          {"residual_blocks", c.residual_blocks},
          {"heads", c.heads},
          {"image_height", c.image_height},
          {"image_width", c.image_width},
          {"batch_norm", c.batch_norm},
          {"context", c.context},
          {"lag_residual", c.lag_residual},
          {"canonical_order", c.canonical_order},
          {"init", c.init == InitMode::zeros ? "zeros" : "standard"},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelConfig c;
  auto field = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("model.") + key + ": wrong type");
    }
  };
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"variant", "aggregator", "layers", "c_channels", "z_channels",
                                  "latent_resolution", "encoder_widths", "hidden_channels", "residual_blocks", "heads",
                                  "image_height", "image_width", "batch_norm", "context", "lag_residual",
                                  "canonical_order", "init", "seed"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("model." + key + ": unknown field");
    }
  }
  std::string variant = variant_name(c.variant), aggregator = aggregator_name(c.aggregator), init = "standard";
  field("variant", variant);
  field("aggregator", aggregator);
  field("init", init);
  c.variant = parse_variant(variant);
  c.aggregator = parse_aggregator(aggregator);
  if (init != "standard" && init != "zeros") throw ConfigError("model.init: expected standard or zeros");
  c.init = init == "zeros" ? InitMode::zeros : InitMode::standard;
  field("layers", c.layers);
  field("c_channels", c.c_channels);
  field("z_channels", c.z_channels);
  field("latent_resolution", c.latent_resolution);
  field("encoder_widths", c.encoder_widths);
  field("hidden_channels", c.hidden_channels);
  field("residual_blocks", c.residual_blocks);
  field("heads", c.heads);
  field("image_height", c.image_height);
  field("image_width", c.image_width);
  field("batch_norm", c.batch_norm);
  field("context", c.context);
  field("lag_residual", c.lag_residual);
  field("canonical_order", c.canonical_order);
  field("seed", c.seed);
  if (c.variant == Variant::bns && !j.contains("layers")) c.layers = 1;
  c.validate();
  return c;
}

}  // namespace hfsgm
