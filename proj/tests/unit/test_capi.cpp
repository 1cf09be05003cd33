// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hfsgm/hfsgm.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hfsgm_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A two-epoch run on tiny 12x12 synthetic data.
fs::path tiny_config(const fs::path& dir) {
  const fs::path path = dir / "tiny.json";
  std::ofstream(path) << R"({
    "preset": "toy",
    "model": {"layers": 2, "c_channels": 4, "z_channels": 3, "encoder_widths": [4, 4],
              "hidden_channels": 8, "image_height": 12, "image_width": 12},
    "data": {"strokes": {"classes": 6, "images_per_class": 8, "size": 12, "seed": 3},
             "splits": {"train": 3, "val": 2, "test": 1}},
    "train": {"epochs": 2, "batch_size": 2, "set_size": 3, "episodes_per_epoch": 4, "val_episodes": 2}
  })";
  return path;
}

struct Command {
  hfsgm_command* cmd = nullptr;
  Command() { REQUIRE(hfsgm_command_create(&cmd) == HFSGM_OK); }
  ~Command() { hfsgm_command_destroy(cmd); }
};

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::strlen(hfsgm_version()) > 0);
  CHECK(hfsgm_command_set_config(nullptr, "x") == HFSGM_ERR_USAGE);

  // Options are validated when a command runs.
  Command bad_split;
  REQUIRE(hfsgm_command_set_split(bad_split.cmd, "nope") == HFSGM_OK);
  CHECK(hfsgm_train(bad_split.cmd) == HFSGM_ERR_USAGE);
  CHECK(std::string(hfsgm_last_error()).find("nope") != std::string::npos);

  Command bad_size;
  REQUIRE(hfsgm_command_set_set_size(bad_size.cmd, 0) == HFSGM_OK);
  CHECK(hfsgm_train(bad_size.cmd) == HFSGM_ERR_USAGE);

  Command no_checkpoint;
  CHECK(hfsgm_eval(no_checkpoint.cmd) == HFSGM_ERR_USAGE);

  hfsgm_model* m = nullptr;
  CHECK(hfsgm_model_load("/nonexistent/model.ckpt", &m) == HFSGM_ERR_DATA);
  CHECK(m == nullptr);
}

TEST_CASE("train then evaluate through the handle API") {
  const fs::path dir = fresh("train");
  Command c;
  REQUIRE(hfsgm_command_set_config(c.cmd, tiny_config(dir).c_str()) == HFSGM_OK);
  REQUIRE(hfsgm_command_set_out(c.cmd, (dir / "run").c_str()) == HFSGM_OK);
  REQUIRE(hfsgm_train(c.cmd) == HFSGM_OK);
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  CHECK(fs::exists(dir / "run" / "last.ckpt"));

  hfsgm_model* m = nullptr;
  REQUIRE(hfsgm_model_load((dir / "run" / "last.ckpt").c_str(), &m) == HFSGM_OK);
  int h = 0, w = 0, layers = 0;
  REQUIRE(hfsgm_model_info(m, &h, &w, &layers) == HFSGM_OK);
  CHECK(h == 12);
  CHECK(w == 12);
  CHECK(layers == 2);

  std::vector<double> pixels(3 * 12 * 12, 0.0);
  for (std::size_t i = 0; i < pixels.size(); i += 5) pixels[i] = 1.0;
  double a = 0.0, b = 0.0, nll = 0.0;
  REQUIRE(hfsgm_model_nelbo(m, pixels.data(), 3, 9, &a) == HFSGM_OK);
  REQUIRE(hfsgm_model_nelbo(m, pixels.data(), 3, 9, &b) == HFSGM_OK);
  CHECK(std::isfinite(a));
  CHECK(a == b);
  REQUIRE(hfsgm_model_nll(m, pixels.data(), 3, 10, 9, &nll) == HFSGM_OK);
  CHECK(std::isfinite(nll));
  CHECK(hfsgm_model_nll(m, pixels.data(), 3, 0, 9, &nll) != HFSGM_OK);

  std::vector<double> out(4 * 12 * 12, -1.0);
  REQUIRE(hfsgm_model_sample(m, 4, 1, out.data()) == HFSGM_OK);
  for (double v : out) CHECK((v == 0.0 || v == 1.0));
  hfsgm_model_destroy(m);

  Command e;
  REQUIRE(hfsgm_command_set_checkpoint(e.cmd, (dir / "run" / "last.ckpt").c_str()) == HFSGM_OK);
  REQUIRE(hfsgm_command_set_config(e.cmd, (dir / "tiny.json").c_str()) == HFSGM_OK);
  REQUIRE(hfsgm_command_set_out(e.cmd, (dir / "eval").c_str()) == HFSGM_OK);
  REQUIRE(hfsgm_command_set_importance_samples(e.cmd, 5) == HFSGM_OK);
  REQUIRE(hfsgm_eval(e.cmd) == HFSGM_OK);
  CHECK(fs::exists(dir / "eval" / "eval.csv"));
}

TEST_CASE("quick oracle check succeeds") {
  Command c;
  REQUIRE(hfsgm_command_set_mode(c.cmd, "quick") == HFSGM_OK);
  CHECK(hfsgm_oracle_check(c.cmd) == HFSGM_OK);
}
