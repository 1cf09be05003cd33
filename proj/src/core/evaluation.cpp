// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "errors.hpp"

namespace hfsgm {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string csv_header(int layers) {
  std::string h = "epoch,split,set_size,nelbo,rec";
  for (int l = 1; l <= layers; ++l) h += ",klz_" + std::to_string(l);
  for (int l = 1; l <= layers; ++l) h += ",klc_" + std::to_string(l);
  return h + ",mll,is,seconds";
}

std::string csv_line(const MetricsRow& r) {
  std::string s = std::to_string(r.epoch) + "," + r.split + "," + std::to_string(r.set_size) + "," + number(r.nelbo) +
                  "," + number(r.rec);
  for (double v : r.klz) s += "," + number(v);
  for (double v : r.klc) s += "," + number(v);
  s += "," + (r.mll ? number(*r.mll) : std::string()) + "," + std::to_string(r.is) + "," + number(r.seconds);
  return s;
}

MetricsRow summarize(const std::vector<ElboTerms>& terms, int layers) {
  MetricsRow row;
  row.klz.assign(static_cast<std::size_t>(layers), 0.0);
  row.klc.assign(static_cast<std::size_t>(layers), 0.0);
  row.episodes = static_cast<int>(terms.size());
  if (terms.empty()) return row;
  row.set_size = terms.front().set_size;
  for (const auto& t : terms) {
    if (static_cast<int>(t.kl_z.size()) != layers) throw ContractError("summarize: layer count mismatch");
    const double s = t.set_size;
    row.nelbo += -t.elbo() / s;
    row.rec += t.rec / s;
    for (std::size_t l = 0; l < t.kl_z.size(); ++l) row.klz[l] += t.kl_z[l] / s;
    const std::size_t offset = static_cast<std::size_t>(layers) - t.kl_c.size();
    for (std::size_t l = 0; l < t.kl_c.size(); ++l) row.klc[offset + l] += t.kl_c[l] / s;
  }
  const double n = static_cast<double>(terms.size());
  row.nelbo /= n;
  row.rec /= n;
  for (double& v : row.klz) v /= n;
  for (double& v : row.klc) v /= n;
  return row;
}

double log_mean_exp(std::span<const double> w) {
  if (w.empty()) throw ContractError("log_mean_exp: no weights");
  const double m = *std::max_element(w.begin(), w.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : w) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(w.size()));
}

double mll_importance(SetModel& model, const SetData& x, int importance_samples, Rng& rng) {
  if (importance_samples < 1) throw ContractError("mll_importance: need at least one importance sample");
  if (x.size < 1) throw ContractError("mll_importance: empty set");
  const auto w = model.log_weights(x, importance_samples, rng);
  return log_mean_exp(w) / x.size;
}

KlReport kl_report(SetModel& model, const std::vector<const SetData*>& episodes, Rng& rng) {
  if (episodes.empty()) throw ContractError("kl_report: no episodes");
  KlReport r;
  // Episodes may differ in size; evaluate them one by one.
  for (const SetData* e : episodes) {
    const ElboTerms t = model.elbo({e}, rng).front();
    if (r.kl_z.empty()) {
      r.kl_z.assign(t.kl_z.size(), 0.0);
      r.kl_c.assign(t.kl_c.size(), 0.0);
    }
    for (std::size_t l = 0; l < t.kl_z.size(); ++l) r.kl_z[l] += t.kl_z[l];
    for (std::size_t l = 0; l < t.kl_c.size(); ++l) r.kl_c[l] += t.kl_c[l];
  }
  const double n = static_cast<double>(episodes.size());
  for (double& v : r.kl_z) v /= n;
  for (double& v : r.kl_c) v /= n;
  return r;
}

std::vector<MetricsRow> cardinality_sweep(SetModel& model, const ClassIndexedDataset& data, const ClassSplits& splits,
                                          SplitTag split, const std::vector<int>& sizes, int episodes_per_size,
                                          BinarizeMode binarize, Rng& rng) {
  if (sizes.empty()) throw ContractError("cardinality_sweep: no sizes");
  if (episodes_per_size < 1) throw ContractError("cardinality_sweep: need at least one episode per size");
  std::vector<MetricsRow> rows;
  for (int s : sizes) {
    std::vector<SetData> sets;
    for (int e = 0; e < episodes_per_size; ++e) {
      sets.push_back(sample_episode(data, splits, split, s, binarize, rng).observations);
    }
    std::vector<const SetData*> ptrs;
    for (const auto& set : sets) ptrs.push_back(&set);
    MetricsRow row = summarize(model.elbo(ptrs, rng), model.layers());
    row.split = split_name(split);
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* classify_method_name(ClassifyMethod m) {
  switch (m) {
    case ClassifyMethod::elbo_diff: return "elbo";
    case ClassifyMethod::predictive: return "predictive";
    case ClassifyMethod::kl: return "kl";
  }
  return "?";
}

ClassifyMethod parse_classify_method(const std::string& name) {
  if (name == "elbo" || name == "I" || name == "1") return ClassifyMethod::elbo_diff;
  if (name == "predictive" || name == "II" || name == "2") return ClassifyMethod::predictive;
  if (name == "kl" || name == "III" || name == "3") return ClassifyMethod::kl;
  throw ConfigError("unknown classification method '" + name + "'; valid: elbo, predictive, kl");
}

namespace {

double mean_elbo(SetModel& model, const SetData& x, int draws, Rng& rng) {
  std::vector<const SetData*> copies(static_cast<std::size_t>(draws), &x);
  double total = 0.0;
  for (const auto& t : model.elbo(copies, rng)) total += t.elbo();
  return total / draws;
}

}  // namespace

ClassifyResult classify(SetModel& model, std::span<const double> x, const std::vector<const SetData*>& class_sets,
                        ClassifyMethod method, const ClassifyOptions& opts, Rng& rng) {
  if (class_sets.size() < 2) throw ContractError("classify: need at least two classes");
  if (static_cast<int>(x.size()) != model.observation_dim()) throw ContractError("classify: bad observation size");
  for (const SetData* s : class_sets) {
    if (s == nullptr || s->size < 1) throw ContractError("classify: empty class set");
  }
  SetData query(1, model.observation_dim());
  std::copy(x.begin(), x.end(), query.values.begin());

  ClassifyResult r;
  const Rng base = rng;
  for (const SetData* set : class_sets) {
    Rng local = base;
    double score = 0.0;
    switch (method) {
      case ClassifyMethod::elbo_diff: {
        const SetData joined = set->appended(x);
        score = mean_elbo(model, joined, opts.elbo_draws, local) - mean_elbo(model, *set, opts.elbo_draws, local);
        break;
      }
      case ClassifyMethod::predictive:
        score = model.predictive_log_likelihood(*set, x, opts.predictive_draws, local);
        break;
      case ClassifyMethod::kl:
        score = model.context_divergence(*set, query);
        break;
    }
    r.scores.push_back(score);
  }
  rng.split();  // move the caller's stream past this decision

  const bool minimize = method == ClassifyMethod::kl && opts.kl_argmin;
  r.predicted = 0;
  for (std::size_t i = 1; i < r.scores.size(); ++i) {
    const double best = r.scores[static_cast<std::size_t>(r.predicted)];
    if (minimize ? r.scores[i] < best : r.scores[i] > best) r.predicted = static_cast<int>(i);
  }
  return r;
}

ClassificationReport evaluate_classification(SetModel& model, const ClassIndexedDataset& data,
                                             const ClassSplits& splits, SplitTag split, int ways, int shots,
                                             int trials, ClassifyMethod method, const ClassifyOptions& opts,
                                             BinarizeMode binarize, Rng& rng) {
  const auto& ids = splits.get(split);
  if (ways < 2) throw ConfigError("classification needs at least two classes per trial");
  if (static_cast<int>(ids.size()) < ways) {
    throw ConfigError("split " + std::string(split_name(split)) + " has " + std::to_string(ids.size()) +
                      " classes, fewer than the " + std::to_string(ways) + " requested");
  }
  ClassificationReport rep;
  rep.confusion.assign(static_cast<std::size_t>(ways), std::vector<int>(static_cast<std::size_t>(ways), 0));
  std::vector<std::string> pool(ids.begin(), ids.end());
  for (int t = 0; t < trials; ++t) {
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    const int truth = static_cast<int>(rng.index(static_cast<std::size_t>(ways)));
    std::vector<SetData> sets;
    SetData query;
    for (int w = 0; w < ways; ++w) {
      const int draw = w == truth ? shots + 1 : shots;
      SetBatch b = sample_class_episode(data, pool[static_cast<std::size_t>(w)], split, draw, binarize, rng);
      if (w == truth) {
        query = SetData(1, b.observations.dim);
        auto last = b.observations.row(shots);
        std::copy(last.begin(), last.end(), query.values.begin());
        b.observations.values.resize(static_cast<std::size_t>(shots) * b.observations.dim);
        b.observations.size = shots;
      }
      sets.push_back(std::move(b.observations));
    }
    std::vector<const SetData*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);
    const auto res = classify(model, query.row(0), ptrs, method, opts, rng);
    rep.trials++;
    rep.correct += res.predicted == truth ? 1 : 0;
    rep.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(res.predicted)]++;
  }
  return rep;
}

}  // namespace hfsgm
