// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "episodes.hpp"
#include "set_model.hpp"

namespace hfsgm {

/// One CSV row. Bound terms are per observation (divided by S); `mll` is the
/// importance-weighted negative log likelihood per observation.
struct MetricsRow {
  int epoch = 0;
  std::string split;
  int set_size = 0;
  double nelbo = 0.0;
  double rec = 0.0;
  std::vector<double> klz;  // length L, layer 1 first
  std::vector<double> klc;  // length L, zero where no context is drawn
  std::optional<double> mll;
  int is = 0;
  int episodes = 0;
  double seconds = 0.0;
};

std::string csv_header(int layers);
std::string csv_line(const MetricsRow& row);

/// Averages per-set terms into a row. Context terms are placed at the layers
/// that draw a context: all layers when there are L of them, the top
/// otherwise.
MetricsRow summarize(const std::vector<ElboTerms>& terms, int layers);

/// log (1/IS) sum_i w_i, divided by S (a per-observation log likelihood).
double log_mean_exp(std::span<const double> log_weights);
double mll_importance(SetModel& model, const SetData& x, int importance_samples, Rng& rng);

struct KlReport {
  std::vector<double> kl_z;
  std::vector<double> kl_c;
};
/// Mean per-set KL of every layer across episodes.
KlReport kl_report(SetModel& model, const std::vector<const SetData*>& episodes, Rng& rng);

/// Fresh episodes of each size from the split; one row per size.
std::vector<MetricsRow> cardinality_sweep(SetModel& model, const ClassIndexedDataset& data, const ClassSplits& splits,
                                          SplitTag split, const std::vector<int>& sizes, int episodes_per_size,
                                          BinarizeMode binarize, Rng& rng);

enum class ClassifyMethod {
  elbo_diff,   // ELBO([X_y, x]) - ELBO(X_y)
  predictive,  // mean log p(x | z, c) under conditional draws from X_y
  kl,          // KL(q(c | X_y) || q(c | x))
};

const char* classify_method_name(ClassifyMethod m);
ClassifyMethod parse_classify_method(const std::string& name);

struct ClassifyOptions {
  int predictive_draws = 100;
  int elbo_draws = 1;
  bool kl_argmin = false;  // default follows the argmax rule
};

struct ClassifyResult {
  int predicted = -1;
  std::vector<double> scores;
};

/// Uniform class prior. Every class is scored with a copy of the same rng
/// stream, so identical sets receive identical scores; ties go to the lowest
/// index.
ClassifyResult classify(SetModel& model, std::span<const double> x, const std::vector<const SetData*>& class_sets,
                        ClassifyMethod method, const ClassifyOptions& opts, Rng& rng);

struct ClassificationReport {
  int trials = 0;
  int correct = 0;
  std::vector<std::vector<int>> confusion;  // [true slot][predicted slot]
  double accuracy() const { return trials ? static_cast<double>(correct) / trials : 0.0; }
};

/// Few-shot trials: `ways` distinct classes with `shots` conditioning images
/// each, and one held-out query from a uniformly chosen slot.
ClassificationReport evaluate_classification(SetModel& model, const ClassIndexedDataset& data,
                                             const ClassSplits& splits, SplitTag split, int ways, int shots,
                                             int trials, ClassifyMethod method, const ClassifyOptions& opts,
                                             BinarizeMode binarize, Rng& rng);

}  // namespace hfsgm
