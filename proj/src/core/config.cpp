// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <fstream>
#include <set>

#include "errors.hpp"

namespace hfsgm {

using nlohmann::json;

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "full") {
    c.model.variant = Variant::hfsgm;
    c.model.aggregator = Aggregator::lag;
    c.model.layers = 3;
    c.model.c_channels = 64;
    c.model.z_channels = 32;
    c.model.latent_resolution = 4;
    c.model.encoder_widths = {128, 128, 128};
    c.model.hidden_channels = 128;
    c.model.residual_blocks = 3;
    c.model.heads = 4;
    c.data.source = "directory";
    c.data.splits = {1000, 200, 423};
    c.data.binarize = BinarizeMode::dynamic;
    c.train.epochs = 400;
    c.train.batch_size = 100;
    c.train.set_size = 5;
    c.train.alpha = 1.0;
    c.train.alpha_step = 0.98;
    c.out_dir = "runs/full";
    return c;
  }
  if (name == "toy") {
    c.model.variant = Variant::ns;
    c.model.aggregator = Aggregator::mean;
    c.model.layers = 3;
    c.model.c_channels = 32;
    c.model.z_channels = 16;
    c.model.latent_resolution = 1;
    c.model.encoder_widths = {16, 32, 32};
    c.model.hidden_channels = 64;
    c.model.heads = 4;
    // Batch statistics over single-class sets fight the context path at this scale.
    c.model.batch_norm = false;
    c.data.source = "strokes";
    c.data.strokes = {1000, 20, 28, 7};
    c.data.splits = {600, 200, 200};
    c.train.epochs = 20;
    c.train.batch_size = 20;
    c.train.set_size = 5;
    c.train.episodes_per_epoch = 4000;
    c.train.alpha = 1.0;
    c.train.alpha_step = 0.9;
    c.train.val_episodes = 40;
    c.eval.importance_samples = 100;
    c.out_dir = "runs/toy";
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'; valid: full, toy");
}

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(section + "." + key + ": unknown field");
  }
}

template <typename T>
void field(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

void positive(int v, const std::string& name) {
  if (v < 1) throw ConfigError(name + ": must be >= 1");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config", {"preset", "model", "train", "data", "eval", "out_dir"});
  std::string base = "toy";
  field(j, "config", "preset", base);
  RunConfig c = preset(base);
  field(j, "config", "out_dir", c.out_dir);

  if (j.contains("model")) {
    json merged = to_json(c.model);
    for (const auto& [k, v] : j.at("model").items()) merged[k] = v;
    if (!j.at("model").is_object()) throw ConfigError("model: expected an object");
    c.model = model_config_from_json(merged);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"epochs", "batch_size", "set_size", "episodes_per_epoch", "learning_rate", "weight_decay",
                            "alpha", "alpha_step", "plateau_patience", "plateau_factor", "val_episodes", "seed"});
    auto& o = c.train;
    field(t, "train", "epochs", o.epochs);
    field(t, "train", "batch_size", o.batch_size);
    field(t, "train", "set_size", o.set_size);
    field(t, "train", "episodes_per_epoch", o.episodes_per_epoch);
    field(t, "train", "learning_rate", o.learning_rate);
    field(t, "train", "weight_decay", o.weight_decay);
    field(t, "train", "alpha", o.alpha);
    field(t, "train", "alpha_step", o.alpha_step);
    field(t, "train", "plateau_patience", o.plateau_patience);
    field(t, "train", "plateau_factor", o.plateau_factor);
    field(t, "train", "val_episodes", o.val_episodes);
    field(t, "train", "seed", o.seed);
  }
  if (c.train.epochs < 0) throw ConfigError("train.epochs: must be >= 0");
  positive(c.train.batch_size, "train.batch_size");
  positive(c.train.set_size, "train.set_size");
  if (c.train.episodes_per_epoch < 0) throw ConfigError("train.episodes_per_epoch: must be >= 0");
  if (!(c.train.learning_rate > 0)) throw ConfigError("train.learning_rate: must be > 0");
  if (!(c.train.weight_decay >= 0)) throw ConfigError("train.weight_decay: must be >= 0");
  if (!(c.train.alpha >= 0)) throw ConfigError("train.alpha: must be >= 0");
  if (!(c.train.alpha_step > 0 && c.train.alpha_step < 1)) throw ConfigError("train.alpha_step: must lie in (0, 1)");
  positive(c.train.plateau_patience, "train.plateau_patience");
  if (!(c.train.plateau_factor > 0 && c.train.plateau_factor < 1)) {
    throw ConfigError("train.plateau_factor: must lie in (0, 1)");
  }
  if (c.train.val_episodes < 0) throw ConfigError("train.val_episodes: must be >= 0");

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"source", "root", "strokes", "splits", "split_seed", "binarize"});
    auto& o = c.data;
    field(d, "data", "source", o.source);
    field(d, "data", "root", o.root);
    field(d, "data", "split_seed", o.split_seed);
    if (d.contains("binarize")) {
      std::string mode;
      field(d, "data", "binarize", mode);
      o.binarize = parse_binarize_mode(mode);
    }
    if (d.contains("strokes")) {
      const json& s = d.at("strokes");
      check_keys(s, "data.strokes", {"classes", "images_per_class", "size", "seed"});
      field(s, "data.strokes", "classes", o.strokes.classes);
      field(s, "data.strokes", "images_per_class", o.strokes.images_per_class);
      field(s, "data.strokes", "size", o.strokes.size);
      field(s, "data.strokes", "seed", o.strokes.seed);
    }
    if (d.contains("splits")) {
      const json& s = d.at("splits");
      check_keys(s, "data.splits", {"train", "val", "test"});
      field(s, "data.splits", "train", o.splits.train);
      field(s, "data.splits", "val", o.splits.val);
      field(s, "data.splits", "test", o.splits.test);
    }
  }
  if (c.data.source != "strokes" && c.data.source != "directory" && c.data.source != "packed") {
    throw ConfigError("data.source: '" + c.data.source + "'; valid: strokes, directory, packed");
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"split", "set_size", "episodes", "importance_samples", "sweep_sizes", "sweep_episodes",
                           "elbo_draws", "predictive_draws", "refine_iters", "refine_mode", "refine_hard", "sample_count",
                           "classify_classes", "classify_set_size", "classify_trials", "kl_argmin"});
    auto& o = c.eval;
    field(e, "eval", "split", o.split);
    field(e, "eval", "set_size", o.set_size);
    field(e, "eval", "episodes", o.episodes);
    field(e, "eval", "importance_samples", o.importance_samples);
    field(e, "eval", "sweep_sizes", o.sweep_sizes);
    field(e, "eval", "sweep_episodes", o.sweep_episodes);
    field(e, "eval", "elbo_draws", o.elbo_draws);
    field(e, "eval", "predictive_draws", o.predictive_draws);
    field(e, "eval", "refine_iters", o.refine_iters);
    if (e.contains("refine_mode")) {
      std::string mode;
      field(e, "eval", "refine_mode", mode);
      o.refine_mode = parse_refine_mode(mode);
    }
    field(e, "eval", "refine_hard", o.refine_hard);
    field(e, "eval", "sample_count", o.sample_count);
    field(e, "eval", "classify_classes", o.classify_classes);
    field(e, "eval", "classify_set_size", o.classify_set_size);
    field(e, "eval", "classify_trials", o.classify_trials);
    field(e, "eval", "kl_argmin", o.kl_argmin);
  }
  parse_split(c.eval.split);
  positive(c.eval.set_size, "eval.set_size");
  positive(c.eval.episodes, "eval.episodes");
  positive(c.eval.importance_samples, "eval.importance_samples");
  if (c.eval.sweep_sizes.empty()) throw ConfigError("eval.sweep_sizes: must be nonempty");
  for (int s : c.eval.sweep_sizes) positive(s, "eval.sweep_sizes");
  positive(c.eval.sweep_episodes, "eval.sweep_episodes");
  positive(c.eval.elbo_draws, "eval.elbo_draws");
  positive(c.eval.predictive_draws, "eval.predictive_draws");
  if (c.eval.refine_iters < 0) throw ConfigError("eval.refine_iters: must be >= 0");
  if (c.eval.sample_count < 0) throw ConfigError("eval.sample_count: must be >= 0");
  if (c.eval.classify_classes < 2) throw ConfigError("eval.classify_classes: must be >= 2");
  positive(c.eval.classify_set_size, "eval.classify_set_size");
  positive(c.eval.classify_trials, "eval.classify_trials");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& d = c.data;
  const auto& e = c.eval;
  return {{"model", to_json(c.model)},
          {"train",
           {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"set_size", t.set_size},
            {"episodes_per_epoch", t.episodes_per_epoch},
            {"learning_rate", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"alpha", t.alpha},
            {"alpha_step", t.alpha_step},
            {"plateau_patience", t.plateau_patience},
            {"plateau_factor", t.plateau_factor},
            {"val_episodes", t.val_episodes},
            {"seed", t.seed}}},
          {"data",
           {{"source", d.source},
            {"root", d.root},
            {"strokes",
             {{"classes", d.strokes.classes},
              {"images_per_class", d.strokes.images_per_class},
              {"size", d.strokes.size},
              {"seed", d.strokes.seed}}},
            {"splits", {{"train", d.splits.train}, {"val", d.splits.val}, {"test", d.splits.test}}},
            {"split_seed", d.split_seed},
            {"binarize", d.binarize == BinarizeMode::dynamic ? "dynamic" : "static"}}},
          {"eval",
           {{"split", e.split},
            {"set_size", e.set_size},
            {"episodes", e.episodes},
            {"importance_samples", e.importance_samples},
            {"sweep_sizes", e.sweep_sizes},
            {"sweep_episodes", e.sweep_episodes},
            {"elbo_draws", e.elbo_draws},
            {"predictive_draws", e.predictive_draws},
            {"refine_iters", e.refine_iters},
            {"refine_mode", refine_mode_name(e.refine_mode)},
            {"refine_hard", e.refine_hard},
            {"sample_count", e.sample_count},
            {"classify_classes", e.classify_classes},
            {"classify_set_size", e.classify_set_size},
            {"classify_trials", e.classify_trials},
            {"kl_argmin", e.kl_argmin}}},
          {"out_dir", c.out_dir}};
}

ClassIndexedDataset load_data(const DataConfig& cfg, int height, int width, const std::string& root_fallback) {
  ClassIndexedDataset ds;
  if (cfg.source == "strokes") {
    ds = make_stroke_dataset(cfg.strokes);
  } else {
    const std::string root = cfg.root.empty() ? root_fallback : cfg.root;
    if (root.empty()) throw DataError("data.root is empty and HFSGM_DATA_ROOT is not set");
    if (cfg.source == "directory") return load_directory(root, height, width);
    ds = load_packed(root);
  }
  if (ds.height() == height && ds.width() == width) return ds;
  ClassIndexedDataset resized;
  for (const auto& cls : ds.classes()) {
    ClassRecord rec{cls.class_id, {}};
    for (const auto& img : cls.images) rec.images.push_back(box_resize(img, height, width));
    resized.add_class(std::move(rec));
  }
  return resized;
}

}  // namespace hfsgm
