// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "errors.hpp"

namespace hfsgm {

/// A set of `size` observations, each a flat vector of `dim` reals, stored
/// row-major. Images are flattened H*W; oracle observations are scalars.
struct SetData {
  int size = 0;
  int dim = 0;
  std::vector<double> values;

  SetData() = default;
  SetData(int size_, int dim_) : size(size_), dim(dim_), values(static_cast<std::size_t>(size_) * dim_, 0.0) {}

  std::span<double> row(int s) {
    return std::span<double>(values).subspan(static_cast<std::size_t>(s) * dim, static_cast<std::size_t>(dim));
  }
  std::span<const double> row(int s) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(s) * dim, static_cast<std::size_t>(dim));
  }

  /// Copy with one extra observation appended.
  SetData appended(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim) throw ContractError("SetData::appended: dimension mismatch");
    SetData out = *this;
    out.values.insert(out.values.end(), x.begin(), x.end());
    ++out.size;
    return out;
  }

  /// Rows in the given order.
  SetData permuted(std::span<const int> order) const {
    SetData out(static_cast<int>(order.size()), dim);
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto src = row(order[i]);
      std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
    }
    return out;
  }
};

}  // namespace hfsgm
