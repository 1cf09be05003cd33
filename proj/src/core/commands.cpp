// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "neural_set_model.hpp"
#include "sampling.hpp"
#include "trainer.hpp"
#include "verification.hpp"

namespace hfsgm {

namespace fs = std::filesystem;

namespace {

void say(const CommandOptions& o, const std::string& line) {
  if (o.log) o.log(line);
}

fs::path out_dir(const CommandOptions& o, const RunConfig& cfg) { return o.out.empty() ? fs::path(cfg.out_dir) : fs::path(o.out); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::uint64_t eval_seed(const RunConfig& cfg) { return derive_seed(cfg.train.seed, 0x4556414c); }

// A trained model plus the data it is evaluated on.
struct Session {
  RunConfig cfg;
  NeuralModel model;
  ClassIndexedDataset data;
  ClassSplits splits;

  explicit Session(const CommandOptions& o) : cfg(load(o)), model(cfg.model) {
    const Checkpoint ck = read_checkpoint(o.checkpoint);
    restore_parameters(ck, cfg.model, model.params());
    data = load_data(cfg.data, cfg.model.image_height, cfg.model.image_width, o.data_root);
    splits = build_splits(data, cfg.data.splits, cfg.data.split_seed);
  }

  static RunConfig load(const CommandOptions& o) {
    if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    RunConfig cfg = resolve_config(o);
    if (o.config_path.empty()) {
      // Without a config file the checkpoint defines the architecture.
      cfg.model = read_checkpoint(o.checkpoint).config;
    }
    return cfg;
  }

  SplitTag split() const { return parse_split(cfg.eval.split); }
};

void write_rows(const fs::path& path, int layers, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv_header(layers) << "\n";
  for (const auto& r : rows) out << csv_line(r) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

RunConfig resolve_config(const CommandOptions& o) {
  RunConfig cfg = o.config_path.empty() ? preset("toy") : load_run_config(o.config_path);
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.model.seed = *o.seed;
  }
  if (o.set_size) {
    if (*o.set_size < 1) throw ConfigError("--set-size must be >= 1");
    cfg.train.set_size = *o.set_size;
    cfg.eval.set_size = *o.set_size;
    cfg.eval.classify_set_size = *o.set_size;
  }
  if (o.importance_samples) {
    if (*o.importance_samples < 1) throw ConfigError("--is must be >= 1");
    cfg.eval.importance_samples = *o.importance_samples;
  }
  if (o.iters) {
    if (*o.iters < 0) throw ConfigError("--iters must be >= 0");
    cfg.eval.refine_iters = *o.iters;
  }
  if (!o.split.empty()) {
    parse_split(o.split);
    cfg.eval.split = o.split;
  }
  return cfg;
}

void cmd_train(const CommandOptions& o) {
  const RunConfig cfg = resolve_config(o);
  const auto data = load_data(cfg.data, cfg.model.image_height, cfg.model.image_width, o.data_root);
  const auto splits = build_splits(data, cfg.data.splits, cfg.data.split_seed);
  Trainer trainer(cfg, data, splits);
  const fs::path dir = out_dir(o, cfg);
  if (!o.checkpoint.empty()) {
    trainer.resume(o.checkpoint);
    say(o, "resumed at epoch " + std::to_string(trainer.state().epoch));
  }
  ensure_dir(dir);
  {
    std::ofstream out(dir / "config.json");
    out << to_json(cfg).dump(2) << "\n";
  }
  say(o, "training " + std::string(variant_name(cfg.model.variant)) + " with " +
             std::to_string(trainer.model().params().trainable_count()) + " parameters on " +
             std::to_string(splits.train.size()) + " classes");
  trainer.run(dir, o.log);
  say(o, "wrote " + (dir / "metrics.csv").string());
}

void cmd_eval(const CommandOptions& o) {
  Session s(o);
  NeuralSetModel model(s.model);
  Rng rng(eval_seed(s.cfg));
  const EvalConfig& e = s.cfg.eval;
  const auto start = std::chrono::steady_clock::now();
  std::vector<SetData> sets;
  for (int i = 0; i < e.episodes; ++i) {
    sets.push_back(sample_episode(s.data, s.splits, s.split(), e.set_size, s.cfg.data.binarize, rng).observations);
  }
  std::vector<const SetData*> repeated;
  for (const auto& set : sets) {
    for (int k = 0; k < e.elbo_draws; ++k) repeated.push_back(&set);
  }
  MetricsRow row = summarize(model.elbo(repeated, rng), s.cfg.model.layers);
  double mll = 0.0;
  for (const auto& set : sets) mll += mll_importance(model, set, e.importance_samples, rng);
  row.mll = -mll / static_cast<double>(sets.size());
  row.is = e.importance_samples;
  row.split = e.split;
  row.episodes = e.episodes;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir = out_dir(o, s.cfg);
  ensure_dir(dir);
  write_rows(dir / "eval.csv", s.cfg.model.layers, {row});
  say(o, csv_header(s.cfg.model.layers));
  say(o, csv_line(row));
}

void cmd_sample(const CommandOptions& o) {
  Session s(o);
  NeuralSetModel model(s.model);
  const std::uint64_t seed = eval_seed(s.cfg);
  Rng rng(seed);
  const EvalConfig& e = s.cfg.eval;
  const std::string mode = o.mode.empty() ? "refined" : o.mode;
  const fs::path dir = out_dir(o, s.cfg) / ("samples_" + mode);
  fs::remove(dir / "manifest.csv");
  const int h = s.cfg.model.image_height, w = s.cfg.model.image_width;
  std::vector<std::vector<double>> images;
  std::vector<DumpEntry> entries;
  auto name = [](const std::string& stem, int a, int b) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d_%03d.pgm", stem.c_str(), a, b);
    return std::string(buf);
  };
  if (mode == "uncond") {
    const Generated g = model.sample_unconditional(e.sample_count, rng);
    for (int i = 0; i < g.samples.size; ++i) {
      images.push_back({g.samples.row(i).begin(), g.samples.row(i).end()});
      entries.push_back({name("uncond", i, 0), "", seed, 0, "sample"});
    }
  } else if (mode == "cond" || mode == "refined") {
    const RefineOptions ro{mode == "cond" ? 0 : e.refine_iters, e.refine_mode, e.refine_hard};
    for (int i = 0; i < e.sample_count; ++i) {
      const SetBatch ep = sample_episode(s.data, s.splits, s.split(), e.set_size, s.cfg.data.binarize, rng);
      for (int k = 0; k < ep.observations.size; ++k) {
        images.push_back({ep.observations.row(k).begin(), ep.observations.row(k).end()});
        entries.push_back({name("context", i, k), ep.class_id, seed, -1, "context"});
      }
      const Trajectory t = sample_refined(model, ep.observations, ro, rng);
      for (int f = 0; f < t.frames(); ++f) {
        images.push_back(t.samples[static_cast<std::size_t>(f)]);
        entries.push_back({name(mode, i, f), ep.class_id, seed, f, mode});
      }
    }
  } else {
    throw ConfigError("unknown sample mode '" + mode + "'; valid: uncond, cond, refined");
  }
  dump_images(dir, h, w, images, entries);
  say(o, "wrote " + std::to_string(images.size()) + " images to " + dir.string());
}

void cmd_sweep(const CommandOptions& o) {
  Session s(o);
  NeuralSetModel model(s.model);
  Rng rng(eval_seed(s.cfg));
  const EvalConfig& e = s.cfg.eval;
  std::vector<MetricsRow> rows;
  for (int size : e.sweep_sizes) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<SetData> sets;
    for (int i = 0; i < e.sweep_episodes; ++i) {
      sets.push_back(sample_episode(s.data, s.splits, s.split(), size, s.cfg.data.binarize, rng).observations);
    }
    std::vector<const SetData*> repeated;
    for (const auto& set : sets) {
      for (int k = 0; k < e.elbo_draws; ++k) repeated.push_back(&set);
    }
    MetricsRow row = summarize(model.elbo(repeated, rng), s.cfg.model.layers);
    row.split = e.split;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    say(o, csv_line(row));
    rows.push_back(row);
  }
  const fs::path dir = out_dir(o, s.cfg);
  ensure_dir(dir);
  write_rows(dir / "sweep.csv", s.cfg.model.layers, rows);
  say(o, "wrote " + (dir / "sweep.csv").string());
}

void cmd_classify(const CommandOptions& o) {
  Session s(o);
  NeuralSetModel model(s.model);
  Rng rng(eval_seed(s.cfg));
  const EvalConfig& e = s.cfg.eval;
  const ClassifyMethod method = parse_classify_method(o.method.empty() ? "elbo" : o.method);
  ClassifyOptions opts;
  opts.predictive_draws = e.predictive_draws;
  opts.elbo_draws = e.elbo_draws;
  opts.kl_argmin = e.kl_argmin;
  const auto rep = evaluate_classification(model, s.data, s.splits, s.split(), e.classify_classes,
                                           e.classify_set_size, e.classify_trials, method, opts,
                                           s.cfg.data.binarize, rng);
  nlohmann::json j = {{"method", classify_method_name(method)},
                      {"classes", e.classify_classes},
                      {"set_size", e.classify_set_size},
                      {"trials", rep.trials},
                      {"correct", rep.correct},
                      {"accuracy", rep.accuracy()},
                      {"confusion", rep.confusion}};
  const fs::path dir = out_dir(o, s.cfg);
  ensure_dir(dir);
  std::ofstream(dir / "classify.json") << j.dump(2) << "\n";
  std::ostringstream msg;
  msg << "accuracy " << rep.accuracy() << " (" << rep.correct << "/" << rep.trials << ")";
  say(o, msg.str());
  for (const auto& r : rep.confusion) {
    std::string line;
    for (int v : r) line += (line.empty() ? "" : " ") + std::to_string(v);
    say(o, line);
  }
}

void cmd_oracle_check(const CommandOptions& o) {
  const CheckProfile profile = parse_profile(o.mode);
  const std::uint64_t seed = o.seed.value_or(2026);
  int failed = 0;
  run_checks(profile, seed, [&](const CheckResult& r) {
    std::ostringstream line;
    line << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.seconds << " s): " << r.detail;
    say(o, line.str());
    failed += r.passed ? 0 : 1;
  });
  if (failed) throw VerificationError(std::to_string(failed) + " oracle check(s) failed");
}

}  // namespace hfsgm
