// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aggregation.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "neural_set_model.hpp"
#include "objective.hpp"
#include "ops.hpp"
#include "oracle.hpp"
#include "sampling.hpp"

namespace hfsgm {

namespace {

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
  CheckResult r;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream detail;
  try {
    r.passed = body(detail);
  } catch (const std::exception& e) {
    r.passed = false;
    detail << "exception: " << e.what();
  }
  r.detail = detail.str();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

ModelConfig small_model(Variant v, Aggregator a, int layers, int resolution) {
  ModelConfig c;
  c.variant = v;
  c.aggregator = a;
  c.layers = layers;
  c.c_channels = 3;
  c.z_channels = 2;
  c.latent_resolution = resolution;
  c.encoder_widths = {4, 4};
  c.hidden_channels = 6;
  c.heads = 2;
  c.image_height = c.image_width = 8;
  c.seed = 3;
  return c;
}

void perturb(ParamStore& store, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += scale * rng.normal();
  }
}

SetData binary_set(int s, int dim, Rng& rng) {
  SetData x(s, dim);
  for (double& v : x.values) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  return x;
}

LagParams random_lag(int dim, int heads, Rng& rng) {
  const int width = heads * lag_head_dim(dim, heads);
  auto w = [&](Shape s) {
    Tensor t(std::move(s));
    for (double& v : t.data()) v = rng.normal();
    return t;
  };
  return LagParams{heads, w({width, dim}), w({width}), w({width, dim}), w({width}),
                   w({width, dim}), w({width}), w({dim, width}), w({dim})};
}

Tensor reorder(const Tensor& t, const std::vector<int>& order) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto src = t.row(order[i]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
  }
  return out;
}

bool close_relative(const Tensor& a, const Tensor& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > tol * std::max({1.0, std::abs(a[i]), std::abs(b[i])})) return false;
  }
  return true;
}

struct FdTally {
  std::size_t checked = 0, within = 0;
  double worst = 0.0, max_diff = 0.0;

  // Differences below `floor` are within the roundoff of the difference quotient.
  void add(double analytic, double numeric, double floor) {
    ++checked;
    const double diff = std::abs(analytic - numeric);
    const double rel = diff <= floor ? 0.0 : diff / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (rel <= 1e-3) ++within;
    worst = std::max(worst, rel);
    max_diff = std::max(max_diff, diff);
  }
  double fraction() const { return checked ? static_cast<double>(within) / checked : 1.0; }
};

void fd_tensor(Tensor& x, const Tensor& analytic, const std::function<double()>& f, double step, double floor,
               FdTally& tally) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f();
    x[i] = keep - step;
    const double down = f();
    x[i] = keep;
    tally.add(analytic[i], (up - down) / (2.0 * step), floor);
  }
}

}  // namespace

CheckProfile default_profile() { return {}; }

CheckProfile quick_profile() { return {30, 60, 20, 2000, 1000}; }

CheckProfile parse_profile(const std::string& name) {
  if (name == "default" || name.empty()) return default_profile();
  if (name == "quick") return quick_profile();
  throw ConfigError("unknown check profile '" + name + "'; valid: default, quick");
}

CheckResult check_oracle_bounds(int trials, std::uint64_t seed) {
  return timed("oracle bounds", [&](std::ostringstream& out) {
    Rng rng(seed);
    double worst_slack = -INFINITY, worst_quad = 0.0;
    for (int t = 0; t < trials; ++t) {
      const double vc = std::exp(rng.uniform() * 3.0 - 1.5);
      const double vz = std::exp(rng.uniform() * 3.0 - 1.5);
      const double vx = std::exp(rng.uniform() * 3.0 - 1.5);
      const int s = 1 + static_cast<int>(rng.index(5));
      const LinearGaussianInstance inst{vc, vz, vx, sample_oracle_set(vc, vz, vx, s, 1, rng)};
      const double exact = exact_log_marginal(inst);
      const double bound = gaussian_elbo(inst, mean_field(exact_posteriors(inst))).elbo();
      worst_slack = std::max(worst_slack, bound - exact);
      worst_quad = std::max(worst_quad, std::abs(exact - quadrature_log_marginal(inst)));
    }
    out << trials << " instances, max(bound - exact) " << worst_slack << ", max |exact - quadrature| " << worst_quad;
    return worst_slack <= 1e-9 && worst_quad <= 1e-4;
  });
}

CheckResult check_iw_convergence(int repetitions, std::uint64_t seed) {
  return timed("importance-weighted convergence", [&](std::ostringstream& out) {
    const double vc = 1.0, vz = 0.5, vx = 0.5;
    const int s = 5;
    Rng rng(seed);
    LinearPosteriorTraining opts;
    opts.set_size = s;
    const LinearPosterior q = train_linear_posterior(vc, vz, vx, opts, rng);
    LinearGaussianModel model(vc, vz, vx, 1, LinearGaussianModel::Posterior::learned, q);
    const SetData x = sample_oracle_set(vc, vz, vx, s, 1, rng);
    const double exact = exact_log_marginal({vc, vz, vx, x}) / s;
    bool ok = true;
    double prev_mean = -INFINITY, prev_var = 0.0;
    for (int is : {1, 10, 100, 1000}) {
      double sum = 0.0, sq = 0.0;
      for (int r = 0; r < repetitions; ++r) {
        const double v = mll_importance(model, x, is, rng);
        sum += v;
        sq += v * v;
      }
      const double mean = sum / repetitions;
      const double var_mean = std::max(0.0, sq / repetitions - mean * mean) / (repetitions - 1);
      out << "IS=" << is << " " << mean << " (se " << std::sqrt(var_mean) << "); ";
      if (is > 1 && is <= 100 && mean + 2.0 * std::sqrt(var_mean + prev_var) < prev_mean) ok = false;
      if (is == 1000 && std::abs(mean - exact) > 3.0 * std::sqrt(var_mean)) ok = false;
      prev_mean = mean;
      prev_var = var_mean;
    }
    out << "exact " << exact;
    return ok;
  });
}

CheckResult check_permutation_invariance(int permutations, std::uint64_t seed) {
  return timed("permutation invariance", [&](std::ostringstream& out) {
    Rng rng(seed);
    const int d = 6;
    const LagParams lag = random_lag(d, 2, rng);
    int failures = 0;
    double worst_weight = 0.0;
    NeuralModel model(small_model(Variant::hfsgm, Aggregator::lag, 2, 2));
    perturb(model.params(), 0.2, seed + 1);
    auto top = [&](const SetData& x) {
      Graph g(model.params(), false, false);
      const auto feat = model.features(g, model.encode_trunk(g, model.stack({&x})));
      const GaussianVars q = model.posterior_c_top(g, feat, x.size);
      std::vector<double> v = values(q.mean.value());
      const auto lv = values(q.log_var.value());
      v.insert(v.end(), lv.begin(), lv.end());
      return v;
    };
    for (int s = 1; s <= 10; ++s) {
      Tensor e({s, d});
      for (double& v : e.data()) v = rng.normal();
      const Tensor ref_mean = mean_pool(e), ref_max = max_pool(e);
      Tensor w;
      const Tensor ref_lag = lag_pool(e, lag, {}, &w);
      const AggregateOptions plain{false, false};
      const Tensor ref_mean_plain = mean_pool(e, plain), ref_lag_plain = lag_pool(e, lag, plain);
      const SetData x = binary_set(s, 64, rng);
      const auto ref_c = top(x);
      std::vector<int> order(static_cast<std::size_t>(s));
      std::iota(order.begin(), order.end(), 0);
      for (int p = 0; p < permutations; ++p) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        const Tensor pe = reorder(e, order);
        Tensor pw;
        if (values(mean_pool(pe)) != values(ref_mean)) ++failures;
        if (values(max_pool(pe)) != values(ref_max)) ++failures;
        if (values(lag_pool(pe, lag, {}, &pw)) != values(ref_lag)) ++failures;
        if (!close_relative(mean_pool(pe, plain), ref_mean_plain, 1e-6)) ++failures;
        if (!close_relative(lag_pool(pe, lag, plain), ref_lag_plain, 1e-6)) ++failures;
        for (int h = 0; h < lag.heads; ++h) {
          double total = 0.0;
          for (int i = 0; i < s; ++i) total += pw[static_cast<std::size_t>(i * lag.heads + h)];
          worst_weight = std::max(worst_weight, std::abs(total - 1.0));
        }
        if (top(x.permuted(order)) != ref_c) ++failures;
      }
    }
    out << "S=1..10, " << permutations << " permutations each: " << failures
        << " mismatches, max |sum(weights) - 1| " << worst_weight;
    return failures == 0 && worst_weight <= 1e-12;
  });
}

CheckResult check_identities(std::uint64_t seed) {
  return timed("decomposition and zero-init identities", [&](std::ostringstream& out) {
    Rng rng(seed);
    bool ok = true;
    int cases = 0;
    for (Variant v : {Variant::bns, Variant::ns, Variant::hfsgm}) {
      for (int r : {1, 2}) {
        for (bool zero : {false, true}) {
          ModelConfig cfg = small_model(v, Aggregator::lag, v == Variant::bns ? 1 : 2, r);
          cfg.init = zero ? InitMode::zeros : InitMode::standard;
          NeuralModel model(cfg);
          if (!zero) perturb(model.params(), 0.2, seed + static_cast<std::uint64_t>(cases));
          NeuralSetModel sm(model);
          const SetData x = binary_set(4, 64, rng);
          const ElboTerms t = sm.elbo({&x}, rng).front();
          double kl = 0.0;
          for (double k : t.kl_z) kl += k;
          for (double k : t.kl_c) kl += k;
          const double manual = t.rec - kl;
          ok = ok && t.elbo() == manual;
          ok = ok && weighted_loss(t, 0.0) == -t.elbo() / t.set_size;
          if (zero) {
            for (double k : t.kl_z) ok = ok && k == 0.0;
            for (double k : t.kl_c) ok = ok && k == 0.0;
            const Generated g = sm.sample_unconditional(2, rng);
            for (double p : g.means.values) ok = ok && p == 0.5;
          }
          ++cases;
        }
      }
    }
    out << cases << " model configurations";
    return ok;
  });
}

CheckResult check_gradients(std::uint64_t seed) {
  return timed("finite-difference gradients", [&](std::ostringstream& out) {
    Rng rng(seed);
    // Attention pooling on its own.
    FdTally lag_tally;
    {
      LagParams p = random_lag(4, 2, rng);
      Tensor e({6, 4});
      for (double& v : e.data()) v = rng.normal();
      Tensor probe({2, 4});
      for (double& v : probe.data()) v = rng.normal();
      auto loss = [&](LagParams* grads) {
        ad::Tape tape;
        const LagVars vars = bind_lag(tape, p, grads);
        const ad::Var pooled = lag_pool(tape.constant(e), 3, vars).pooled;
        const ad::Var l = ad::sum(ad::mul(pooled, tape.constant(probe)));
        if (grads) tape.backward(l);
        return l.scalar();
      };
      LagParams g = p;
      for (Tensor* t : {&g.wq, &g.bq, &g.wk, &g.bk, &g.wv, &g.bv, &g.wo, &g.bo}) t->fill(0.0);
      loss(&g);
      Tensor* params[] = {&p.wq, &p.bq, &p.wk, &p.bk, &p.wv, &p.bv, &p.wo, &p.bo};
      const Tensor* grads[] = {&g.wq, &g.bq, &g.wk, &g.bk, &g.wv, &g.bv, &g.wo, &g.bo};
      for (int k = 0; k < 8; ++k) fd_tensor(*params[k], *grads[k], [&] { return loss(nullptr); }, 1e-6, 1e-8, lag_tally);
    }
    // Full hierarchical training loss on 4x4 images without normalization.
    FdTally model_tally;
    {
      ModelConfig cfg = small_model(Variant::hfsgm, Aggregator::lag, 2, 1);
      cfg.image_height = cfg.image_width = 4;
      cfg.encoder_widths = {3, 3};
      cfg.batch_norm = false;
      NeuralModel m(cfg);
      perturb(m.params(), 0.3, seed + 7);
      const SetData a = binary_set(3, 16, rng), b = binary_set(3, 16, rng);
      auto loss = [&](bool grad) {
        Rng noise_rng(seed + 42);
        RngNoise noise(noise_rng);
        Graph g(m.params(), grad, true);
        const Tensor images = m.stack({&a, &b});
        const auto feat = m.features(g, m.encode_trunk(g, images));
        const PassVars pass = m.run(g, feat, 2, 3, {2, 2, nullptr, true}, noise);
        const ad::Var l = weighted_loss_var(elbo_vars(pass, images), 0.5, 3);
        if (grad) g.tape.backward(l);
        return l.scalar();
      };
      m.params().zero_grad();
      loss(true);
      for (auto& [name, e] : m.params().entries()) {
        if (!e.trainable) continue;
        const Tensor analytic = e.grad;
        fd_tensor(e.value, analytic, [&] { return loss(false); }, 1e-5, 1e-8, model_tally);
      }
    }
    out << "pooling: " << lag_tally.checked << " entries, " << lag_tally.fraction() * 100 << "% within 1e-3, worst "
        << lag_tally.worst << ", max |diff| " << lag_tally.max_diff << "; model: " << model_tally.checked
        << " entries, " << model_tally.fraction() * 100 << "% within 1e-3, worst " << model_tally.worst
        << ", max |diff| " << model_tally.max_diff;
    return lag_tally.fraction() >= 0.95 && lag_tally.worst <= 1e-2 && model_tally.fraction() >= 0.95 &&
           model_tally.worst <= 1e-2;
  });
}

CheckResult check_refinement(int chains, std::uint64_t seed) {
  return timed("refinement", [&](std::ostringstream& out) {
    Rng rng(seed);
    bool ok = true;
    // Zero iterations: the same draws as conditional sampling.
    NeuralModel model(small_model(Variant::hfsgm, Aggregator::lag, 2, 2));
    perturb(model.params(), 0.2, seed + 3);
    NeuralSetModel sm(model);
    LinearGaussianModel oracle(1.0, 0.5, 0.5, 1);
    const SetData images = binary_set(3, 64, rng);
    const SetData scalars = sample_oracle_set(1.0, 0.5, 0.5, 3, 1, rng);
    for (std::uint64_t k = 0; k < 5; ++k) {
      for (RefineMode mode : {RefineMode::posterior, RefineMode::mixed}) {
        Rng a(seed + k), b(seed + k);
        ok = ok && sample_refined(sm, images, {0, mode, false}, a).samples[0] == sm.sample_conditional(images, b).samples.values;
        Rng c(seed + k), d(seed + k);
        ok = ok && sample_refined(oracle, scalars, {0, mode, true}, c).samples[0] ==
                       oracle.sample_conditional(scalars, d).samples.values;
      }
    }
    out << "zero-iteration equality " << (ok ? "holds" : "FAILS") << "; ";
    // Chains with exact posteriors against the predictive moments.
    const auto pred = exact_predictive({1.0, 0.5, 0.5, scalars});
    double sum = 0.0, sq = 0.0;
    for (int c = 0; c < chains; ++c) {
      const double v = sample_refined(oracle, scalars, {10, RefineMode::posterior, true}, rng).final_sample()[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / chains;
    const double var = (sq - chains * mean * mean) / (chains - 1);
    const double mean_sd = std::sqrt(pred.var / chains);
    const double var_sd = pred.var * std::sqrt(2.0 / (chains - 1));
    out << chains << " chains: mean " << mean << " vs " << pred.mean[0] << " (3 sd " << 3 * mean_sd << "), var " << var
        << " vs " << pred.var << " (3 sd " << 3 * var_sd << ")";
    ok = ok && std::abs(mean - pred.mean[0]) <= 3.0 * mean_sd && std::abs(var - pred.var) <= 3.0 * var_sd;
    return ok;
  });
}

CheckResult check_classifier(int trials, std::uint64_t seed) {
  return timed("classifier", [&](std::ostringstream& out) {
    // Class centres 5 observation-sd apart, symmetric about the prior mean,
    // under a broad context prior.
    const double vc = 100.0, vz = 0.5, vx = 0.5;
    const double sd = std::sqrt(vz + vx);
    LinearGaussianModel model(vc, vz, vx, 1);
    Rng rng(seed);
    const std::vector<double> c0{-2.5 * sd}, c1{2.5 * sd};
    int correct = 0;
    for (int t = 0; t < trials; ++t) {
      const SetData a = sample_oracle_set(vc, vz, vx, 20, 1, rng, &c0);
      const SetData b = sample_oracle_set(vc, vz, vx, 20, 1, rng, &c1);
      const int truth = static_cast<int>(rng.index(2));
      const SetData q = sample_oracle_set(vc, vz, vx, 1, 1, rng, truth == 0 ? &c0 : &c1);
      correct += classify(model, q.row(0), {&a, &b}, ClassifyMethod::elbo_diff, {}, rng).predicted == truth ? 1 : 0;
    }
    const double accuracy = static_cast<double>(correct) / trials;
    // Identical class sets must tie exactly, for every method.
    bool ties = true;
    NeuralModel nm(small_model(Variant::ns, Aggregator::mean, 2, 1));
    perturb(nm.params(), 0.2, seed + 5);
    NeuralSetModel sm(nm);
    const SetData set = binary_set(3, 64, rng), query = binary_set(1, 64, rng);
    const SetData oset = sample_oracle_set(vc, vz, vx, 4, 1, rng);
    for (ClassifyMethod m : {ClassifyMethod::elbo_diff, ClassifyMethod::predictive, ClassifyMethod::kl}) {
      ClassifyOptions opts;
      opts.predictive_draws = 10;
      const auto r = classify(sm, query.row(0), {&set, &set}, m, opts, rng);
      ties = ties && r.scores[0] == r.scores[1] && r.predicted == 0;
      const auto o = classify(model, oset.row(0), {&oset, &oset, &oset}, m, opts, rng);
      ties = ties && o.scores[0] == o.scores[1] && o.scores[1] == o.scores[2] && o.predicted == 0;
    }
    out << "method I accuracy " << accuracy * 100 << "% over " << trials << " trials; ties "
        << (ties ? "exact" : "BROKEN");
    return accuracy >= 0.99 && ties;
  });
}

std::vector<CheckResult> run_checks(const CheckProfile& p, std::uint64_t seed,
                                    const std::function<void(const CheckResult&)>& report) {
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r) {
    if (report) report(r);
    out.push_back(std::move(r));
  };
  add(check_oracle_bounds(p.bound_trials, seed));
  add(check_iw_convergence(p.iw_repetitions, seed + 1));
  add(check_permutation_invariance(p.permutations, seed + 2));
  add(check_identities(seed + 3));
  add(check_gradients(seed + 4));
  add(check_refinement(p.chains, seed + 5));
  add(check_classifier(p.classify_trials, seed + 6));
  return out;
}

}  // namespace hfsgm
