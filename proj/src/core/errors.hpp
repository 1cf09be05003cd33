// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hfsgm {

/// Base class for every error raised by the core library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range input data (images, datasets).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on a function argument (shapes, empty sets).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a model variant that does not support it.
class VariantError : public Error {
 public:
  using Error::Error;
};

/// Corrupt, truncated or mismatched checkpoint file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A verification battery found a failing check.
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hfsgm
