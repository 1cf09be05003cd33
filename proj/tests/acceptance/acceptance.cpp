// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "episodes.hpp"
#include "evaluation.hpp"
#include "neural_set_model.hpp"
#include "trainer.hpp"
#include "verification.hpp"

namespace fs = std::filesystem;
using namespace hfsgm;

namespace {

constexpr std::uint64_t kSeed = 2026;
// Training trend checks use the desk-scale preset for its first 20 epochs.
constexpr int kTrendEpochs = 20;
constexpr int kTrendEpisodes = 200;
constexpr double kTrendBudgetSeconds = 30.0 * 60.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double seconds) {
  if (!o.passed) ++failures;
  std::printf("%s %d %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), seconds);
  std::fflush(stdout);
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

Outcome from_check(const CheckResult& r, double budget_seconds = 0.0) {
  Outcome o{r.passed, r.detail};
  if (budget_seconds > 0.0 && r.seconds >= budget_seconds) {
    o.passed = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(budget_seconds)) + " s budget";
  }
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hfsgm_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string drop_last_column(const std::string& line) { return line.substr(0, line.rfind(',')); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// Train NELBO per completed epoch, read back from metrics.csv.
std::vector<double> train_curve(const fs::path& csv) {
  std::vector<double> curve;
  const auto lines = read_lines(csv);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> cols;
    std::stringstream ss(lines[i]);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() > 3 && cols[1] == "train") curve.push_back(std::stod(cols[3]));
  }
  return curve;
}

double heldout_nelbo(NeuralModel& model, const ClassIndexedDataset& data, const ClassSplits& splits,
                     const RunConfig& cfg) {
  NeuralSetModel view(model);
  Rng episodes(derive_seed(kSeed, 1));
  std::vector<SetData> sets;
  for (int e = 0; e < kTrendEpisodes; ++e) {
    sets.push_back(sample_episode(data, splits, SplitTag::test, cfg.train.set_size, cfg.data.binarize, episodes)
                       .observations);
  }
  std::vector<const SetData*> ptrs;
  for (const auto& s : sets) ptrs.push_back(&s);
  Rng noise(derive_seed(kSeed, 2));
  return summarize(view.elbo(ptrs, noise), model.config().layers).nelbo;
}

struct TrendRun {
  std::vector<double> loss;   // weighted training loss per epoch
  std::vector<double> curve;  // train nelbo per epoch
  double heldout = 0.0;
  double seconds = 0.0;
};

TrendRun train_trend(RunConfig cfg, const ClassIndexedDataset& data, const ClassSplits& splits, const fs::path& dir,
                     NeuralModel* keep = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.train.epochs = kTrendEpochs;
  Trainer trainer(cfg, data, splits);
  trainer.run(dir);
  TrendRun r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.loss = trainer.epoch_losses();
  r.curve = train_curve(dir / "metrics.csv");
  r.heldout = heldout_nelbo(trainer.model(), data, splits, cfg);
  if (keep) keep->params() = trainer.model().params();
  return r;
}

bool bit_equal(const ParamStore& a, const ParamStore& b) {
  if (a.entries().size() != b.entries().size()) return false;
  for (const auto& [name, entry] : a.entries()) {
    const auto it = b.entries().find(name);
    if (it == b.entries().end()) return false;
    const auto& x = entry.value.storage();
    const auto& y = it->second.value.storage();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  const CheckProfile profile = default_profile();

  run(1, "oracle bound suite", [&] { return from_check(check_oracle_bounds(profile.bound_trials, kSeed), 10.0); });
  run(2, "importance-weighted convergence",
      [&] { return from_check(check_iw_convergence(profile.iw_repetitions, kSeed), 120.0); });
  run(3, "permutation invariance",
      [&] { return from_check(check_permutation_invariance(profile.permutations, kSeed)); });
  run(4, "decomposition and zero-init identities", [&] { return from_check(check_identities(kSeed)); });
  run(5, "gradient checks", [&] { return from_check(check_gradients(kSeed), 60.0); });
  run(6, "refinement correctness", [&] { return from_check(check_refinement(profile.chains, kSeed)); });

  const RunConfig ns_cfg = preset("toy");
  RunConfig vae_cfg = ns_cfg;
  vae_cfg.model.context = false;
  const auto data = load_data(ns_cfg.data, ns_cfg.model.image_height, ns_cfg.model.image_width);
  const auto splits = build_splits(data, ns_cfg.data.splits, ns_cfg.data.split_seed);
  NeuralModel ns_model(ns_cfg.model);

  run(7, "desk-scale training trends", [&] {
    const TrendRun ns = train_trend(ns_cfg, data, splits, scratch("ns"), &ns_model);
    const TrendRun vae = train_trend(vae_cfg, data, splits, scratch("vae"));

    NeuralSetModel view(ns_model);
    Rng rng(derive_seed(kSeed, 3));
    const auto sweep = cardinality_sweep(view, data, splits, SplitTag::test, {1, 10}, kTrendEpisodes,
                                         ns_cfg.data.binarize, rng);

    const auto count_rises = [](const std::vector<double>& v) {
      int n = 0;
      for (std::size_t e = 1; e < v.size(); ++e) n += v[e] >= v[e - 1];
      return n;
    };
    const int rises = count_rises(ns.loss);
    const bool a = ns.heldout < vae.heldout;
    const bool b = sweep[1].nelbo < sweep[0].nelbo;
    const bool c = static_cast<int>(ns.loss.size()) == kTrendEpochs && rises == 0;
    const bool budget = ns.seconds + vae.seconds < kTrendBudgetSeconds;

    std::string d = "(a) held-out nelbo ns " + fmt(ns.heldout) + " vs vae " + fmt(vae.heldout);
    d += "; (b) nelbo size 10 " + fmt(sweep[1].nelbo) + " vs size 1 " + fmt(sweep[0].nelbo);
    d += "; (c) training loss " + fmt(ns.loss.front()) + " -> " + fmt(ns.loss.back()) + " with " +
         std::to_string(rises) + " non-decreasing epochs (train nelbo " + fmt(ns.curve.front()) + " -> " +
         fmt(ns.curve.back()) + ", " + std::to_string(count_rises(ns.curve)) + ")";
    d += "; training " + fmt(ns.seconds + vae.seconds) + " s";
    return Outcome{a && b && c && budget, d};
  });

  run(8, "classifier sanity", [&] { return from_check(check_classifier(profile.classify_trials, kSeed)); });

  run(9, "reproducibility and persistence", [&] {
    RunConfig small = preset("toy");
    small.train.epochs = 2;
    small.train.episodes_per_epoch = 40;
    small.train.val_episodes = 10;
    const fs::path first = scratch("repro_a");
    const fs::path second = scratch("repro_b");
    Trainer(small, data, splits).run(first);
    Trainer(small, data, splits).run(second);
    const auto la = read_lines(first / "metrics.csv");
    const auto lb = read_lines(second / "metrics.csv");
    bool csv_same = la.size() == lb.size() && la.size() > 1;
    for (std::size_t i = 0; csv_same && i < la.size(); ++i) csv_same = drop_last_column(la[i]) == drop_last_column(lb[i]);

    const fs::path dir = scratch("ckpt");
    write_checkpoint(dir / "a.ckpt", make_checkpoint(ns_cfg.model, ns_model.params()));
    NeuralModel restored(ns_cfg.model);
    restore_parameters(read_checkpoint(dir / "a.ckpt"), ns_cfg.model, restored.params());
    write_checkpoint(dir / "b.ckpt", make_checkpoint(ns_cfg.model, restored.params()));
    const bool params_same = bit_equal(ns_model.params(), restored.params());
    const bool bytes_same = file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt");

    const std::string cmd =
        std::string("\"") + HFSGM_CLI_PATH + "\" oracle-check --out \"" + scratch("cli").string() + "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

    std::string d = std::string("csv ") + (csv_same ? "identical" : "differs") + " over " + std::to_string(la.size()) +
                    " lines; checkpoint parameters " + (params_same ? "bit-exact" : "differ") + ", file bytes " +
                    (bytes_same ? "identical" : "differ") + "; oracle-check exit " + std::to_string(code);
    return Outcome{csv_same && params_same && bytes_same && code == 0, d};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
