// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Episodic training loop with Adam, annealed alpha and a plateau schedule.

#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "evaluation.hpp"
#include "model.hpp"

namespace hfsgm {

/// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr, double weight_decay);
  std::int64_t steps() const { return t_; }

  void save(std::map<std::string, Blob>& blobs) const;
  void load(const std::map<std::string, Blob>& blobs, const ParamStore& store);

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  double alpha = 1.0;
  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  int stagnant = 0;
};

class Trainer {
 public:
  Trainer(RunConfig cfg, const ClassIndexedDataset& data, ClassSplits splits);

  NeuralModel& model() { return model_; }
  const TrainState& state() const { return state_; }
  const RunConfig& config() const { return cfg_; }

  /// Restores parameters, optimizer moments and schedule state.
  void resume(const std::filesystem::path& checkpoint);
  Checkpoint snapshot() const;

  /// One pass over a fresh episode collection; returns the train row.
  MetricsRow train_epoch();
  /// Mean weighted training loss of each train_epoch call in this process.
  const std::vector<double>& epoch_losses() const { return losses_; }
  /// Bound on the fixed validation episodes; nullopt when the split is empty.
  std::optional<MetricsRow> validate();

  /// Runs until `cfg.train.epochs` epochs are complete, writing metrics.csv,
  /// last.ckpt and best.ckpt into `out_dir`. Resumed runs keep the rows of
  /// completed epochs and continue after them.
  void run(const std::filesystem::path& out_dir, const std::function<void(const std::string&)>& log = {});

 private:
  RunConfig cfg_;
  const ClassIndexedDataset& data_;
  ClassSplits splits_;
  NeuralModel model_;
  Adam adam_;
  TrainState state_;
  std::vector<SetData> val_sets_;
  std::vector<double> losses_;
};

}  // namespace hfsgm
