// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "episodes.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "neural_set_model.hpp"
#include "oracle.hpp"
#include "sampling.hpp"

using namespace hfsgm;

namespace {

ModelConfig tiny(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.aggregator = Aggregator::mean;
  c.layers = v == Variant::bns ? 1 : 2;
  c.c_channels = 3;
  c.z_channels = 2;
  c.latent_resolution = 1;
  c.encoder_widths = {4, 4};
  c.hidden_channels = 6;
  c.image_height = c.image_width = 8;
  return c;
}

void perturb(ParamStore& store, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += scale * rng.normal();
  }
}

SetData random_set(int s, int dim, Rng& rng) {
  SetData x(s, dim);
  for (double& v : x.values) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  return x;
}

ElboTerms terms(double rec, std::vector<double> kz, std::vector<double> kc, int s) {
  ElboTerms t;
  t.rec = rec;
  t.kl_z = std::move(kz);
  t.kl_c = std::move(kc);
  t.set_size = s;
  return t;
}

}  // namespace

TEST_CASE("csv layout") {
  CHECK(csv_header(3) == "epoch,split,set_size,nelbo,rec,klz_1,klz_2,klz_3,klc_1,klc_2,klc_3,mll,is,seconds");
  MetricsRow r = summarize({terms(-8.0, {1.0, 2.0}, {4.0}, 2)}, 2);
  r.epoch = 3;
  r.split = "val";
  CHECK(csv_line(r) == "3,val,2,7.500000,-4.000000,0.500000,1.000000,0.000000,2.000000,,0,0.000000");
  r.mll = 7.25;
  r.is = 10;
  CHECK(csv_line(r) == "3,val,2,7.500000,-4.000000,0.500000,1.000000,0.000000,2.000000,7.250000,10,0.000000");
}

TEST_CASE("summaries average per observation") {
  const MetricsRow r = summarize({terms(-10.0, {2.0}, {1.0}, 2), terms(-6.0, {0.0}, {1.0}, 2)}, 1);
  CHECK(r.nelbo == doctest::Approx((13.0 / 2 + 7.0 / 2) / 2));
  CHECK(r.rec == doctest::Approx(-4.0));
  CHECK(r.klz[0] == doctest::Approx(0.5));
  CHECK(r.klc[0] == doctest::Approx(0.5));
  CHECK(r.episodes == 2);
  CHECK(r.nelbo == doctest::Approx(-r.rec + r.klz[0] + r.klc[0]).epsilon(1e-14));
}

TEST_CASE("log mean exp") {
  const std::vector<double> same(10, -3.5);
  CHECK(log_mean_exp(same) == doctest::Approx(-3.5).epsilon(1e-15));
  const std::vector<double> two{0.0, std::log(3.0)};
  CHECK(log_mean_exp(two) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> huge{-1000.0, -1000.0 + std::log(3.0)};
  CHECK(log_mean_exp(huge) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("importance estimate with one sample matches the bound on average") {
  NeuralModel m(tiny(Variant::hfsgm));
  perturb(m.params(), 0.2, 4);
  NeuralSetModel sm(m);
  Rng rng(1);
  const SetData x = random_set(3, 64, rng);
  CHECK_THROWS_AS(mll_importance(sm, x, 0, rng), ContractError);
  const int n = 3000;
  double sw = 0.0, sw2 = 0.0, se = 0.0, se2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = mll_importance(sm, x, 1, rng) * 3;
    const double e = sm.elbo({&x}, rng).front().elbo();
    sw += w;
    sw2 += w * w;
    se += e;
    se2 += e * e;
  }
  const double mw = sw / n, me = se / n;
  const double err = std::sqrt((sw2 / n - mw * mw) / n + (se2 / n - me * me) / n);
  CHECK(std::abs(mw - me) < 4.0 * err);
}

TEST_CASE("importance estimate increases with the sample count on the oracle") {
  Rng rng(2);
  LinearPosteriorTraining opts;
  opts.set_size = 4;
  const LinearPosterior q = train_linear_posterior(1.0, 0.5, 0.5, opts, rng);
  LinearGaussianModel m(1.0, 0.5, 0.5, 1, LinearGaussianModel::Posterior::learned, q);
  const SetData x = sample_oracle_set(1.0, 0.5, 0.5, 4, 1, rng);
  const double exact = exact_log_marginal({1.0, 0.5, 0.5, x}) / 4;
  double prev = -INFINITY;
  for (int is : {1, 10, 100}) {
    double mean = 0.0;
    for (int r = 0; r < 200; ++r) mean += mll_importance(m, x, is, rng);
    mean /= 200;
    CHECK(mean > prev);
    CHECK(mean <= exact + 1e-3);
    prev = mean;
  }
}

TEST_CASE("identical class sets tie exactly and pick the first") {
  NeuralModel m(tiny(Variant::ns));
  perturb(m.params(), 0.2, 9);
  NeuralSetModel sm(m);
  Rng rng(3);
  const SetData a = random_set(3, 64, rng);
  const SetData q = random_set(1, 64, rng);
  for (ClassifyMethod method : {ClassifyMethod::elbo_diff, ClassifyMethod::predictive, ClassifyMethod::kl}) {
    ClassifyOptions opts;
    opts.predictive_draws = 5;
    const auto r = classify(sm, q.row(0), {&a, &a, &a}, method, opts, rng);
    CHECK(r.scores[0] == r.scores[1]);
    CHECK(r.scores[1] == r.scores[2]);
    CHECK(r.predicted == 0);
  }
  CHECK_THROWS_AS(classify(sm, q.row(0), {&a}, ClassifyMethod::kl, {}, rng), ContractError);
  CHECK_THROWS_AS(parse_classify_method("vote"), ConfigError);
}

TEST_CASE("oracle classifier separates distant classes") {
  // Class centres 5 observation-sd apart, symmetric about the prior mean.
  const double vc = 100.0, vz = 0.5, vx = 0.5;
  LinearGaussianModel m(vc, vz, vx, 1);
  Rng rng(4);
  const double sd = std::sqrt(vz + vx);
  const std::vector<double> c0{-2.5 * sd}, c1{2.5 * sd};
  int correct = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const SetData a = sample_oracle_set(vc, vz, vx, 20, 1, rng, &c0);
    const SetData b = sample_oracle_set(vc, vz, vx, 20, 1, rng, &c1);
    const int truth = static_cast<int>(rng.index(2));
    const SetData q = sample_oracle_set(vc, vz, vx, 1, 1, rng, truth == 0 ? &c0 : &c1);
    const auto r = classify(m, q.row(0), {&a, &b}, ClassifyMethod::elbo_diff, {}, rng);
    // With exact posteriors the score is the exact predictive log density.
    const auto pred = exact_predictive({vc, vz, vx, a});
    const double d = q.values[0] - pred.mean[0];
    CHECK(r.scores[0] == doctest::Approx(-0.5 * (std::log(2 * M_PI * pred.var) + d * d / pred.var)).epsilon(1e-9));
    correct += r.predicted == truth ? 1 : 0;
  }
  CHECK(correct >= trials * 97 / 100);
}

TEST_CASE("kl classifier direction") {
  LinearGaussianModel m(4.0, 0.5, 0.5, 1);
  SetData near(5, 1), far(5, 1), q(1, 1);
  near.values = {1.0, 1.1, 0.9, 1.0, 1.0};
  far.values = {-3.0, -3.1, -2.9, -3.0, -3.0};
  q.values = {1.0};
  Rng rng(1);
  ClassifyOptions opts;
  const auto max_rule = classify(m, q.row(0), {&near, &far}, ClassifyMethod::kl, opts, rng);
  CHECK(max_rule.scores[0] < max_rule.scores[1]);
  CHECK(max_rule.predicted == 1);
  opts.kl_argmin = true;
  CHECK(classify(m, q.row(0), {&near, &far}, ClassifyMethod::kl, opts, rng).predicted == 0);
}

TEST_CASE("cardinality sweep and few-shot trials on stroke data") {
  const auto data = make_stroke_dataset({6, 6, 8, 1});
  const auto splits = build_splits(data, {2, 0, 4}, 0);
  NeuralModel m(tiny(Variant::ns));
  NeuralSetModel sm(m);
  Rng rng(5);
  std::vector<int> sizes;
  for (int s = 1; s <= 20; ++s) sizes.push_back(s);
  const auto rows = cardinality_sweep(sm, data, splits, SplitTag::test, sizes, 2, BinarizeMode::dynamic, rng);
  REQUIRE(rows.size() == 20);
  for (int s = 0; s < 20; ++s) {
    CHECK(rows[static_cast<std::size_t>(s)].set_size == s + 1);
    CHECK(rows[static_cast<std::size_t>(s)].split == "test");
  }
  const auto rep = evaluate_classification(sm, data, splits, SplitTag::test, 3, 2, 10, ClassifyMethod::kl, {},
                                           BinarizeMode::dynamic, rng);
  CHECK(rep.trials == 10);
  int total = 0;
  for (const auto& row : rep.confusion) for (int v : row) total += v;
  CHECK(total == 10);
  CHECK_THROWS_AS(evaluate_classification(sm, data, splits, SplitTag::test, 5, 2, 1, ClassifyMethod::kl, {},
                                          BinarizeMode::dynamic, rng),
                  ConfigError);
}

TEST_CASE("refinement without iterations equals the conditional sample") {
  NeuralModel m(tiny(Variant::hfsgm));
  perturb(m.params(), 0.2, 12);
  NeuralSetModel sm(m);
  Rng data(7);
  const SetData x = random_set(3, 64, data);
  const SetData keep = x;
  for (RefineMode mode : {RefineMode::posterior, RefineMode::mixed}) {
    Rng r1(99), r2(99);
    const Trajectory t = sample_refined(sm, x, {0, mode, false}, r1);
    const Generated g = sm.sample_conditional(x, r2);
    REQUIRE(t.frames() == 1);
    CHECK(t.samples[0] == g.samples.values);
    CHECK(t.means[0] == g.means.values);
    CHECK(r1.uniform() == r2.uniform());
  }
  Rng rng(3);
  const Trajectory t = sample_refined(sm, x, {20, RefineMode::mixed, true}, rng);
  CHECK(t.frames() == 21);
  for (const auto& f : t.samples) for (double v : f) CHECK((v == 0.0 || v == 1.0));
  for (const auto& f : t.means) for (double v : f) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(x.values == keep.values);
  CHECK_THROWS_AS(sample_refined(sm, x, {-1, RefineMode::posterior, false}, rng), ConfigError);
}

TEST_CASE("refined chain targets the exact predictive") {
  LinearGaussianModel m(1.0, 0.5, 0.5, 1);
  SetData x(3, 1);
  x.values = {1.2, 0.4, 2.0};
  const auto pred = exact_predictive({1.0, 0.5, 0.5, x});
  Rng rng(8);
  const int chains = 2000;
  double s = 0.0, s2 = 0.0;
  for (int c = 0; c < chains; ++c) {
    const double v = sample_refined(m, x, {5, RefineMode::posterior, true}, rng).final_sample()[0];
    s += v;
    s2 += v * v;
  }
  const double mean = s / chains;
  const double var = s2 / chains - mean * mean;
  CHECK(std::abs(mean - pred.mean[0]) < 3.0 * std::sqrt(pred.var / chains));
  CHECK(std::abs(var - pred.var) < 3.0 * pred.var * std::sqrt(2.0 / (chains - 1)));
}

TEST_CASE("image dumps write pgm files and a manifest") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hfsgm_dump_test";
  fs::remove_all(dir);
  dump_images(dir, 2, 2, {{0.0, 1.0, 0.5, 1.0}, {1.0, 1.0, 0.0, 0.0}},
              {{"a.pgm", "k1", 5, 0, "refined"}, {"b.pgm", "k1", 5, 1, "refined"}});
  const Image a = read_pgm(dir / "a.pgm");
  CHECK(a.height == 2);
  CHECK(a.pixels[1] == 1.0);
  std::ifstream in(dir / "manifest.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "file,class_id,seed,iteration,kind");
  std::getline(in, line);
  CHECK(line == "a.pgm,k1,5,0,refined");
  fs::remove_all(dir);
}
