// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Self-checks against closed-form answers and exact invariants. Each check
// is deterministic given its seed.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hfsgm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CheckProfile {
  int bound_trials = 100;
  int iw_repetitions = 200;
  int permutations = 100;
  int chains = 10000;
  int classify_trials = 5000;
};

CheckProfile default_profile();
CheckProfile quick_profile();
/// "default" or "quick"; throws ConfigError otherwise.
CheckProfile parse_profile(const std::string& name);

/// Mean-field bound below the exact log marginal; closed form against quadrature.
CheckResult check_oracle_bounds(int trials, std::uint64_t seed);
/// Importance estimates rise with the sample count and approach the truth.
CheckResult check_iw_convergence(int repetitions, std::uint64_t seed);
/// Pooling and context posteriors under random reorderings of each set.
CheckResult check_permutation_invariance(int permutations, std::uint64_t seed);
/// Bound decomposition and zero-initialization neutrality.
CheckResult check_identities(std::uint64_t seed);
/// Analytic gradients of attention pooling and of a small training loss.
CheckResult check_gradients(std::uint64_t seed);
/// Zero-iteration refinement equals conditional sampling; chains hit the
/// exact predictive moments.
CheckResult check_refinement(int chains, std::uint64_t seed);
/// Two well separated classes and exact ties for identical sets.
CheckResult check_classifier(int trials, std::uint64_t seed);

std::vector<CheckResult> run_checks(const CheckProfile& profile, std::uint64_t seed,
                                    const std::function<void(const CheckResult&)>& report = {});

}  // namespace hfsgm
