// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "trainer.hpp"

using namespace hfsgm;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(int epochs) {
  RunConfig c = preset("toy");
  c.model.c_channels = 4;
  c.model.z_channels = 3;
  c.model.encoder_widths = {4, 4};
  c.model.hidden_channels = 8;
  c.model.layers = 2;
  c.model.image_height = c.model.image_width = 12;
  c.data.strokes = {6, 8, 12, 3};
  c.data.splits = {3, 2, 1};
  c.train.epochs = epochs;
  c.train.batch_size = 2;
  c.train.set_size = 3;
  c.train.episodes_per_epoch = 4;
  c.train.val_episodes = 3;
  c.train.seed = 5;
  return c;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the trailing wall-clock column of every line.
std::string without_seconds(const std::string& csv) {
  std::stringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("one epoch writes a checkpoint and one training row") {
  TempDir dir("hfsgm_train_one");
  RunConfig cfg = small_run(1);
  cfg.data.splits = {3, 0, 3};
  const auto data = load_data(cfg.data, 12, 12);
  Trainer t(cfg, data, build_splits(data, cfg.data.splits, cfg.data.split_seed));
  t.run(dir.path);
  CHECK(fs::exists(dir.path / "last.ckpt"));
  CHECK(fs::exists(dir.path / "best.ckpt"));
  const std::string csv = read(dir.path / "metrics.csv");
  std::stringstream in(csv);
  std::string header, row, extra;
  std::getline(in, header);
  CHECK(header == "epoch,split,set_size,nelbo,rec,klz_1,klz_2,klc_1,klc_2,mll,is,seconds");
  CHECK(std::getline(in, row));
  CHECK(row.rfind("1,train,3,", 0) == 0);
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("identical config and seed give identical metrics") {
  TempDir a("hfsgm_train_a"), b("hfsgm_train_b");
  const RunConfig cfg = small_run(3);
  const auto data = load_data(cfg.data, 12, 12);
  const auto splits = build_splits(data, cfg.data.splits, cfg.data.split_seed);
  Trainer(cfg, data, splits).run(a.path);
  Trainer(cfg, data, splits).run(b.path);
  const std::string ca = read(a.path / "metrics.csv");
  CHECK(without_seconds(ca) == without_seconds(read(b.path / "metrics.csv")));
  CHECK(read(a.path / "last.ckpt") == read(b.path / "last.ckpt"));
}

TEST_CASE("resume continues exactly where the run stopped") {
  TempDir full("hfsgm_train_full"), split("hfsgm_train_split");
  RunConfig cfg = small_run(4);
  cfg.train.plateau_patience = 1;  // exercise the schedule state too
  const auto data = load_data(cfg.data, 12, 12);
  const auto splits = build_splits(data, cfg.data.splits, cfg.data.split_seed);
  Trainer(cfg, data, splits).run(full.path);

  RunConfig first = cfg;
  first.train.epochs = 2;
  Trainer(first, data, splits).run(split.path);
  Trainer resumed(cfg, data, splits);
  resumed.resume(split.path / "last.ckpt");
  CHECK(resumed.state().epoch == 2);
  CHECK(resumed.state().alpha == doctest::Approx(cfg.train.alpha * cfg.train.alpha_step * cfg.train.alpha_step));
  resumed.run(split.path);
  CHECK(without_seconds(read(full.path / "metrics.csv")) == without_seconds(read(split.path / "metrics.csv")));
  CHECK(read(full.path / "last.ckpt") == read(split.path / "last.ckpt"));
}

TEST_CASE("configuration errors name the field") {
  nlohmann::json j = {{"train", {{"batch_size", 0}}}};
  try {
    parse_run_config(j);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config({{"trian", {}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"preset", "nope"}}), ConfigError);
  CHECK_NOTHROW(parse_run_config(to_json(preset("full"))));
  CHECK(parse_run_config(to_json(preset("toy"))).model == preset("toy").model);
}

TEST_CASE("adam moves against the gradient") {
  ParamStore store;
  store.add("w", Tensor({2}, std::vector<double>{1.0, -1.0}));
  store.grad("w")[0] = 2.0;
  store.grad("w")[1] = -3.0;
  Adam adam;
  adam.step(store, 0.1, 0.0);
  // First bias-corrected step has magnitude lr for every coordinate.
  CHECK(store.value("w")[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(store.value("w")[1] == doctest::Approx(-0.9).epsilon(1e-9));
}

TEST_CASE("epoch loss is the weighted bound and reduces to the nelbo at alpha zero") {
  RunConfig cfg = small_run(2);
  cfg.train.alpha = 0.0;
  const auto data = load_data(cfg.data, 12, 12);
  Trainer t(cfg, data, build_splits(data, cfg.data.splits, cfg.data.split_seed));
  const MetricsRow first = t.train_epoch();
  const MetricsRow second = t.train_epoch();
  REQUIRE(t.epoch_losses().size() == 2);
  CHECK(t.epoch_losses()[0] == doctest::Approx(first.nelbo).epsilon(1e-12));
  CHECK(t.epoch_losses()[1] == doctest::Approx(second.nelbo).epsilon(1e-12));
}
