// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference gradient checking for test code.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tensor.hpp"

namespace hfsgm::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t within_tol = 0;
  double worst_rel = 0.0;

  double fraction() const { return checked ? static_cast<double>(within_tol) / checked : 1.0; }
};

inline double relative_error(double analytic, double numeric, double abs_floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= abs_floor) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
}

/// Compares `analytic` against central differences of `f` perturbing each
/// entry of `x` in place (restored afterwards).
inline GradCheckResult check_gradient(Tensor& x, const Tensor& analytic, const std::function<double()>& f,
                                      double rel_tol, double step = 1e-6, double abs_floor = 1e-8) {
  GradCheckResult r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f();
    x[i] = orig - step;
    const double fm = f();
    x[i] = orig;
    const double numeric = (fp - fm) / (2 * step);
    const double rel = relative_error(analytic[i], numeric, abs_floor);
    ++r.checked;
    if (rel <= rel_tol) ++r.within_tol;
    r.worst_rel = std::max(r.worst_rel, rel);
  }
  return r;
}

}  // namespace hfsgm::testing
