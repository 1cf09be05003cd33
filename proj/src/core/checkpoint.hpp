// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint file: "HFSG1", u32 version, u32 length + JSON model config,
// u32 blob count, then blobs of (u16 name length, name, u8 dtype, u8 rank,
// u32 dims, raw little-endian data). dtype 0 = f64, 1 = f32, 2 = i64; all
// values are held as doubles in memory.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "model_config.hpp"
#include "params.hpp"

namespace hfsgm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class BlobType : std::uint8_t { f64 = 0, f32 = 1, i64 = 2 };

struct Blob {
  BlobType type = BlobType::f64;
  Tensor value;
};

struct Checkpoint {
  ModelConfig config;
  std::map<std::string, Blob> blobs;
};

/// Writes atomically (temporary file, then rename).
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Reads the whole file; throws CheckpointError on any corruption.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Every parameter of the store as an f64 blob, plus `extra`.
Checkpoint make_checkpoint(const ModelConfig& config, const ParamStore& store,
                           std::map<std::string, Blob> extra = {});

/// Copies the checkpoint's parameters into `store` after checking that the
/// stored config equals `expected` and that every name and shape matches.
/// Nothing is modified when a check fails.
void restore_parameters(const Checkpoint& ckpt, const ModelConfig& expected, ParamStore& store);

}  // namespace hfsgm
