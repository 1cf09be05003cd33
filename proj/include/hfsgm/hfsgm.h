/* Copyright 2026 The hfsgm Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the hfsgm library. Every call returns an hfsgm_status; on
 * failure hfsgm_last_error() describes the problem for the calling thread.
 */

#ifndef HFSGM_HFSGM_H_
#define HFSGM_HFSGM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(HFSGM_BUILDING_LIBRARY)
#define HFSGM_API __attribute__((visibility("default")))
#else
#define HFSGM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hfsgm_status {
  HFSGM_OK = 0,
  HFSGM_ERR_USAGE = 1,        /* invalid configuration or arguments */
  HFSGM_ERR_DATA = 2,         /* missing or malformed data, files or checkpoints */
  HFSGM_ERR_VERIFICATION = 3  /* a self-check or numerical guard failed */
} hfsgm_status;

HFSGM_API const char* hfsgm_version(void);
/* Message of the last failed call on this thread; empty after success. */
HFSGM_API const char* hfsgm_last_error(void);

/* ---- commands ---------------------------------------------------------- */

typedef struct hfsgm_command hfsgm_command;
typedef void (*hfsgm_log_fn)(const char* line, void* user);

HFSGM_API hfsgm_status hfsgm_command_create(hfsgm_command** out);
HFSGM_API void hfsgm_command_destroy(hfsgm_command* cmd);

/* Optional settings; NULL or empty strings clear a setting. */
HFSGM_API hfsgm_status hfsgm_command_set_config(hfsgm_command* cmd, const char* path);
HFSGM_API hfsgm_status hfsgm_command_set_checkpoint(hfsgm_command* cmd, const char* path);
HFSGM_API hfsgm_status hfsgm_command_set_out(hfsgm_command* cmd, const char* dir);
HFSGM_API hfsgm_status hfsgm_command_set_data_root(hfsgm_command* cmd, const char* dir);
HFSGM_API hfsgm_status hfsgm_command_set_seed(hfsgm_command* cmd, uint64_t seed);
HFSGM_API hfsgm_status hfsgm_command_set_set_size(hfsgm_command* cmd, int set_size);
HFSGM_API hfsgm_status hfsgm_command_set_importance_samples(hfsgm_command* cmd, int samples);
HFSGM_API hfsgm_status hfsgm_command_set_iters(hfsgm_command* cmd, int iters);
HFSGM_API hfsgm_status hfsgm_command_set_mode(hfsgm_command* cmd, const char* mode);
HFSGM_API hfsgm_status hfsgm_command_set_method(hfsgm_command* cmd, const char* method);
HFSGM_API hfsgm_status hfsgm_command_set_split(hfsgm_command* cmd, const char* split);
HFSGM_API hfsgm_status hfsgm_command_set_logger(hfsgm_command* cmd, hfsgm_log_fn fn, void* user);

HFSGM_API hfsgm_status hfsgm_train(const hfsgm_command* cmd);
HFSGM_API hfsgm_status hfsgm_eval(const hfsgm_command* cmd);
HFSGM_API hfsgm_status hfsgm_sample(const hfsgm_command* cmd);
HFSGM_API hfsgm_status hfsgm_sweep(const hfsgm_command* cmd);
HFSGM_API hfsgm_status hfsgm_classify(const hfsgm_command* cmd);
HFSGM_API hfsgm_status hfsgm_oracle_check(const hfsgm_command* cmd);

/* ---- trained models ---------------------------------------------------- */

typedef struct hfsgm_model hfsgm_model;

HFSGM_API hfsgm_status hfsgm_model_load(const char* checkpoint, hfsgm_model** out);
HFSGM_API void hfsgm_model_destroy(hfsgm_model* model);
HFSGM_API hfsgm_status hfsgm_model_info(const hfsgm_model* model, int* height, int* width, int* layers);

/* One-draw negative bound per observation for a set of `set_size` binary
 * images of height*width pixels each, stored row-major back to back. */
HFSGM_API hfsgm_status hfsgm_model_nelbo(hfsgm_model* model, const double* pixels, int set_size, uint64_t seed,
                                         double* nelbo);
/* Importance-weighted negative log likelihood per observation. */
HFSGM_API hfsgm_status hfsgm_model_nll(hfsgm_model* model, const double* pixels, int set_size, int samples,
                                       uint64_t seed, double* nll);
/* `count` unconditional binary samples written to `out` (count*height*width). */
HFSGM_API hfsgm_status hfsgm_model_sample(hfsgm_model* model, int count, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* HFSGM_HFSGM_H_ */
