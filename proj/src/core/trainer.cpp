// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "neural_set_model.hpp"
#include "objective.hpp"

namespace hfsgm {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEpochStream = 0x45504f43;
constexpr std::uint64_t kValSetStream = 0x56534554;
constexpr std::uint64_t kValNoiseStream = 0x564e4f49;

Blob scalar_blob(double v, BlobType type = BlobType::f64) { return {type, Tensor({1}, v)}; }

double scalar_of(const std::map<std::string, Blob>& blobs, const std::string& name) {
  auto it = blobs.find(name);
  if (it == blobs.end()) throw CheckpointError("checkpoint lacks training state '" + name + "'");
  if (it->second.value.size() != 1) throw CheckpointError("training state '" + name + "' is not a scalar");
  return it->second.value[0];
}

}  // namespace

void Adam::step(ParamStore& store, double lr, double weight_decay) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    auto [mit, fresh] = m_.try_emplace(name, e.value.shape(), 0.0);
    if (fresh) v_.emplace(name, Tensor(e.value.shape(), 0.0));
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i] + weight_decay * e.value[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      e.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::save(std::map<std::string, Blob>& blobs) const {
  blobs["adam.step"] = scalar_blob(static_cast<double>(t_), BlobType::i64);
  for (const auto& [name, m] : m_) blobs["adam.m." + name] = {BlobType::f64, m};
  for (const auto& [name, v] : v_) blobs["adam.v." + name] = {BlobType::f64, v};
}

void Adam::load(const std::map<std::string, Blob>& blobs, const ParamStore& store) {
  t_ = static_cast<std::int64_t>(scalar_of(blobs, "adam.step"));
  m_.clear();
  v_.clear();
  if (t_ == 0) return;
  for (const auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    auto m = blobs.find("adam.m." + name);
    auto v = blobs.find("adam.v." + name);
    if (m == blobs.end() || v == blobs.end()) throw CheckpointError("checkpoint lacks optimizer state for " + name);
    if (m->second.value.shape() != e.value.shape() || v->second.value.shape() != e.value.shape()) {
      throw CheckpointError("optimizer state shape mismatch for " + name);
    }
    m_.emplace(name, m->second.value);
    v_.emplace(name, v->second.value);
  }
}

Trainer::Trainer(RunConfig cfg, const ClassIndexedDataset& data, ClassSplits splits)
    : cfg_(std::move(cfg)), data_(data), splits_(std::move(splits)), model_(cfg_.model) {
  const TrainConfig& t = cfg_.train;
  if (splits_.train.empty()) throw ConfigError("train split has no classes");
  state_.alpha = t.alpha;
  state_.lr = t.learning_rate;
  Rng rng(derive_seed(t.seed, kValSetStream));
  if (!splits_.val.empty()) {
    for (int e = 0; e < t.val_episodes; ++e) {
      val_sets_.push_back(
          sample_episode(data_, splits_, SplitTag::val, t.set_size, cfg_.data.binarize, rng).observations);
    }
  }
}

MetricsRow Trainer::train_epoch() {
  const TrainConfig& t = cfg_.train;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(derive_seed(t.seed, kEpochStream), static_cast<std::uint64_t>(state_.epoch)));
  const int count = t.episodes_per_epoch > 0 ? t.episodes_per_epoch : static_cast<int>(splits_.train.size());
  std::vector<SetData> episodes;
  episodes.reserve(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    episodes.push_back(sample_episode(data_, splits_, SplitTag::train, t.set_size, cfg_.data.binarize, rng).observations);
  }

  std::vector<ElboTerms> seen;
  RngNoise noise(rng);
  for (int begin = 0; begin < count; begin += t.batch_size) {
    const int end = std::min(count, begin + t.batch_size);
    std::vector<const SetData*> batch;
    for (int i = begin; i < end; ++i) batch.push_back(&episodes[static_cast<std::size_t>(i)]);
    model_.params().zero_grad();
    Graph g(model_.params(), true, true);
    const Tensor images = model_.stack(batch);
    const ad::Var feat = model_.features(g, model_.encode_trunk(g, images));
    const int L = cfg_.model.layers;
    PassVars pass = model_.run(g, feat, static_cast<int>(batch.size()), t.set_size, {L, L, nullptr, true}, noise);
    const ElboVars terms = elbo_vars(pass, images);
    const ad::Var loss = weighted_loss_var(terms, state_.alpha, t.set_size);
    if (!std::isfinite(loss.scalar())) {
      throw VerificationError("non-finite training loss at epoch " + std::to_string(state_.epoch + 1));
    }
    g.tape.backward(loss);
    adam_.step(model_.params(), state_.lr, t.weight_decay);
    const auto batch_terms = to_terms(terms, t.set_size);
    seen.insert(seen.end(), batch_terms.begin(), batch_terms.end());
  }

  losses_.push_back(batch_loss(seen, state_.alpha));
  MetricsRow row = summarize(seen, cfg_.model.layers);
  row.epoch = state_.epoch + 1;
  row.split = "train";
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::optional<MetricsRow> Trainer::validate() {
  if (val_sets_.empty()) return std::nullopt;
  const auto start = std::chrono::steady_clock::now();
  NeuralSetModel m(model_);
  Rng rng(derive_seed(cfg_.train.seed, kValNoiseStream));
  std::vector<const SetData*> ptrs;
  for (const auto& s : val_sets_) ptrs.push_back(&s);
  MetricsRow row = summarize(m.elbo(ptrs, rng), cfg_.model.layers);
  row.epoch = state_.epoch + 1;
  row.split = "val";
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

Checkpoint Trainer::snapshot() const {
  std::map<std::string, Blob> extra;
  extra["train.epoch"] = scalar_blob(state_.epoch, BlobType::i64);
  extra["train.alpha"] = scalar_blob(state_.alpha);
  extra["train.lr"] = scalar_blob(state_.lr);
  extra["train.best"] = scalar_blob(state_.best);
  extra["train.stagnant"] = scalar_blob(state_.stagnant, BlobType::i64);
  adam_.save(extra);
  return make_checkpoint(cfg_.model, model_.params(), std::move(extra));
}

void Trainer::resume(const fs::path& checkpoint) {
  const Checkpoint ck = read_checkpoint(checkpoint);
  TrainState s;
  s.epoch = static_cast<int>(scalar_of(ck.blobs, "train.epoch"));
  s.alpha = scalar_of(ck.blobs, "train.alpha");
  s.lr = scalar_of(ck.blobs, "train.lr");
  s.best = scalar_of(ck.blobs, "train.best");
  s.stagnant = static_cast<int>(scalar_of(ck.blobs, "train.stagnant"));
  Adam adam;
  adam.load(ck.blobs, model_.params());
  restore_parameters(ck, cfg_.model, model_.params());
  adam_ = std::move(adam);
  state_ = s;
}

void Trainer::run(const fs::path& out_dir, const std::function<void(const std::string&)>& log) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const fs::path csv = out_dir / "metrics.csv";
  const std::string header = csv_header(cfg_.model.layers);

  // Keep only rows of epochs already completed by the restored state.
  std::string kept = header + "\n";
  if (state_.epoch > 0 && fs::exists(csv)) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    if (line != header) throw DataError(csv.string() + " has a different column layout");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoi(line.substr(0, line.find(','))) <= state_.epoch) kept += line + "\n";
    }
  }
  {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw IoError("cannot write " + csv.string());
    out << kept;
  }

  while (state_.epoch < cfg_.train.epochs) {
    const MetricsRow train = train_epoch();
    const std::optional<MetricsRow> val = validate();
    const double monitored = val ? val->nelbo : train.nelbo;
    const bool improved = monitored < state_.best;
    if (improved) {
      state_.best = monitored;
      state_.stagnant = 0;
    } else if (++state_.stagnant >= cfg_.train.plateau_patience) {
      state_.lr *= cfg_.train.plateau_factor;
      state_.stagnant = 0;
    }
    state_.alpha = anneal({state_.alpha, cfg_.train.alpha_step}).alpha;
    ++state_.epoch;

    std::ofstream out(csv, std::ios::app);
    out << csv_line(train) << "\n";
    if (val) out << csv_line(*val) << "\n";
    if (!out) throw IoError("write failed for " + csv.string());
    out.close();

    const Checkpoint ck = snapshot();
    write_checkpoint(out_dir / "last.ckpt", ck);
    if (improved) write_checkpoint(out_dir / "best.ckpt", ck);
    if (log) {
      std::ostringstream msg;
      msg << "epoch " << state_.epoch << " train loss " << losses_.back() << " nelbo " << train.nelbo;
      if (val) msg << " val nelbo " << val->nelbo;
      msg << " alpha " << state_.alpha << " lr " << state_.lr;
      log(msg.str());
    }
  }
}

}  // namespace hfsgm
