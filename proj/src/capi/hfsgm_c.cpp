// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfsgm/hfsgm.h"

#include <string>

#include "checkpoint.hpp"
#include "commands.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "neural_set_model.hpp"

struct hfsgm_command {
  hfsgm::CommandOptions options;
};

struct hfsgm_model {
  explicit hfsgm_model(const hfsgm::Checkpoint& ck) : net(ck.config), view(net) {
    hfsgm::restore_parameters(ck, ck.config, net.params());
  }
  hfsgm::NeuralModel net;
  hfsgm::NeuralSetModel view;
};

namespace {

thread_local std::string last_error;

hfsgm_status fail(hfsgm_status code, const std::string& msg) {
  last_error = msg;
  return code;
}

// Maps library exceptions onto status codes.
template <typename F>
hfsgm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return HFSGM_OK;
  } catch (const hfsgm::ConfigError& e) {
    return fail(HFSGM_ERR_USAGE, e.what());
  } catch (const hfsgm::VerificationError& e) {
    return fail(HFSGM_ERR_VERIFICATION, e.what());
  } catch (const hfsgm::Error& e) {
    return fail(HFSGM_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HFSGM_ERR_DATA, "out of memory");
  } catch (const std::exception& e) {
    return fail(HFSGM_ERR_DATA, e.what());
  }
}

hfsgm_status need(const void* p, const char* what) {
  return p ? HFSGM_OK : fail(HFSGM_ERR_USAGE, std::string(what) + " is null");
}

std::string text(const char* s) { return s ? s : ""; }

template <typename F>
hfsgm_status with_command(hfsgm_command* cmd, F&& f) {
  if (need(cmd, "command") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] { f(cmd->options); });
}

template <typename F>
hfsgm_status run(const hfsgm_command* cmd, F&& f) {
  if (need(cmd, "command") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] { f(cmd->options); });
}

hfsgm::SetData set_from(const hfsgm_model* m, const double* pixels, int set_size) {
  if (!pixels) throw hfsgm::ConfigError("pixels is null");
  if (set_size < 1) throw hfsgm::ConfigError("set_size must be >= 1");
  hfsgm::SetData x(set_size, m->view.observation_dim());
  std::copy(pixels, pixels + x.values.size(), x.values.begin());
  return x;
}

}  // namespace

extern "C" {

const char* hfsgm_version(void) { return "1.0.0"; }

const char* hfsgm_last_error(void) { return last_error.c_str(); }

hfsgm_status hfsgm_command_create(hfsgm_command** out) {
  if (need(out, "out") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] { *out = new hfsgm_command(); });
}

void hfsgm_command_destroy(hfsgm_command* cmd) { delete cmd; }

hfsgm_status hfsgm_command_set_config(hfsgm_command* cmd, const char* path) {
  return with_command(cmd, [&](auto& o) { o.config_path = text(path); });
}
hfsgm_status hfsgm_command_set_checkpoint(hfsgm_command* cmd, const char* path) {
  return with_command(cmd, [&](auto& o) { o.checkpoint = text(path); });
}
hfsgm_status hfsgm_command_set_out(hfsgm_command* cmd, const char* dir) {
  return with_command(cmd, [&](auto& o) { o.out = text(dir); });
}
hfsgm_status hfsgm_command_set_data_root(hfsgm_command* cmd, const char* dir) {
  return with_command(cmd, [&](auto& o) { o.data_root = text(dir); });
}
hfsgm_status hfsgm_command_set_seed(hfsgm_command* cmd, uint64_t seed) {
  return with_command(cmd, [&](auto& o) { o.seed = seed; });
}
hfsgm_status hfsgm_command_set_set_size(hfsgm_command* cmd, int set_size) {
  return with_command(cmd, [&](auto& o) { o.set_size = set_size; });
}
hfsgm_status hfsgm_command_set_importance_samples(hfsgm_command* cmd, int samples) {
  return with_command(cmd, [&](auto& o) { o.importance_samples = samples; });
}
hfsgm_status hfsgm_command_set_iters(hfsgm_command* cmd, int iters) {
  return with_command(cmd, [&](auto& o) { o.iters = iters; });
}
hfsgm_status hfsgm_command_set_mode(hfsgm_command* cmd, const char* mode) {
  return with_command(cmd, [&](auto& o) { o.mode = text(mode); });
}
hfsgm_status hfsgm_command_set_method(hfsgm_command* cmd, const char* method) {
  return with_command(cmd, [&](auto& o) { o.method = text(method); });
}
hfsgm_status hfsgm_command_set_split(hfsgm_command* cmd, const char* split) {
  return with_command(cmd, [&](auto& o) { o.split = text(split); });
}
hfsgm_status hfsgm_command_set_logger(hfsgm_command* cmd, hfsgm_log_fn fn, void* user) {
  return with_command(cmd, [&](auto& o) {
    if (fn) {
      o.log = [fn, user](const std::string& line) { fn(line.c_str(), user); };
    } else {
      o.log = nullptr;
    }
  });
}

hfsgm_status hfsgm_train(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_train); }
hfsgm_status hfsgm_eval(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_eval); }
hfsgm_status hfsgm_sample(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_sample); }
hfsgm_status hfsgm_sweep(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_sweep); }
hfsgm_status hfsgm_classify(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_classify); }
hfsgm_status hfsgm_oracle_check(const hfsgm_command* cmd) { return run(cmd, hfsgm::cmd_oracle_check); }

hfsgm_status hfsgm_model_load(const char* checkpoint, hfsgm_model** out) {
  if (need(checkpoint, "checkpoint") != HFSGM_OK || need(out, "out") != HFSGM_OK) return HFSGM_ERR_USAGE;
  *out = nullptr;
  return guarded([&] { *out = new hfsgm_model(hfsgm::read_checkpoint(checkpoint)); });
}

void hfsgm_model_destroy(hfsgm_model* model) { delete model; }

hfsgm_status hfsgm_model_info(const hfsgm_model* model, int* height, int* width, int* layers) {
  if (need(model, "model") != HFSGM_OK) return HFSGM_ERR_USAGE;
  const auto& c = model->net.config();
  if (height) *height = c.image_height;
  if (width) *width = c.image_width;
  if (layers) *layers = c.layers;
  last_error.clear();
  return HFSGM_OK;
}

hfsgm_status hfsgm_model_nelbo(hfsgm_model* model, const double* pixels, int set_size, uint64_t seed,
                               double* nelbo) {
  if (need(model, "model") != HFSGM_OK || need(nelbo, "nelbo") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] {
    const hfsgm::SetData x = set_from(model, pixels, set_size);
    hfsgm::Rng rng(seed);
    *nelbo = -model->view.elbo({&x}, rng).front().elbo() / set_size;
  });
}

hfsgm_status hfsgm_model_nll(hfsgm_model* model, const double* pixels, int set_size, int samples, uint64_t seed,
                             double* nll) {
  if (need(model, "model") != HFSGM_OK || need(nll, "nll") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] {
    if (samples < 1) throw hfsgm::ConfigError("samples must be >= 1");
    const hfsgm::SetData x = set_from(model, pixels, set_size);
    hfsgm::Rng rng(seed);
    *nll = -hfsgm::mll_importance(model->view, x, samples, rng);
  });
}

hfsgm_status hfsgm_model_sample(hfsgm_model* model, int count, uint64_t seed, double* out) {
  if (need(model, "model") != HFSGM_OK || need(out, "out") != HFSGM_OK) return HFSGM_ERR_USAGE;
  return guarded([&] {
    if (count < 0) throw hfsgm::ConfigError("count must be >= 0");
    hfsgm::Rng rng(seed);
    const hfsgm::Generated g = model->view.sample_unconditional(count, rng);
    std::copy(g.samples.values.begin(), g.samples.values.end(), out);
  });
}

}  // extern "C"
