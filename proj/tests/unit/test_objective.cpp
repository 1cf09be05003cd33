// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "errors.hpp"
#include "objective.hpp"

using namespace hfsgm;

namespace {

ElboTerms terms(double rec, std::vector<double> kz, std::vector<double> kc, int s) {
  ElboTerms t;
  t.rec = rec;
  t.kl_z = std::move(kz);
  t.kl_c = std::move(kc);
  t.set_size = s;
  return t;
}

}  // namespace

TEST_CASE("elbo identity") {
  const auto t = terms(-10.0, {1.5, 0.25}, {2.0, 0.25}, 3);
  CHECK(t.kl_total() == 4.0);
  CHECK(t.elbo() == -14.0);
}

TEST_CASE("weighted loss examples") {
  // alpha = 1: -[2 * (-10) - 4 / 2] = 22.
  CHECK(weighted_loss(terms(-10.0, {3.0}, {1.0}, 1), 1.0) == 22.0);
  CHECK(weighted_loss(terms(-10.0, {3.0}, {1.0}, 2), 1.0) == 11.0);

  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const int s = 1 + static_cast<int>(rng.index(20));
    const auto t = terms(-100.0 * rng.uniform(), {rng.uniform(), rng.uniform()}, {rng.uniform()}, s);
    CHECK(weighted_loss(t, 0.0) == -t.elbo() / s);
  }
  CHECK_THROWS_AS(weighted_loss(terms(-1.0, {}, {}, 1), -0.1), ContractError);
}

TEST_CASE("alpha trades reconstruction against KL") {
  const auto t = terms(-10.0, {2.0}, {2.0}, 1);
  double prev = weighted_loss(t, 0.0);
  for (double a : {0.5, 1.0, 2.0}) {
    const double cur = weighted_loss(t, a);
    CHECK(cur > prev);  // reconstruction dominates here
    prev = cur;
  }
}

TEST_CASE("anneal") {
  CHECK(anneal({2.0, 0.5}).alpha == 1.0);
  CHECK(anneal({0.0, 0.9}).alpha == 0.0);
  AnnealState s{1.0, 0.98};
  for (int e = 0; e < 100; ++e) {
    const auto n = anneal(s);
    CHECK(n.alpha <= s.alpha);
    CHECK(n.alpha >= 0.0);
    s = n;
  }
  CHECK_THROWS_AS(anneal({1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(anneal({1.0, 0.0}), ConfigError);
}

TEST_CASE("batch loss") {
  const auto a = terms(-10.0, {3.0}, {1.0}, 4);
  const auto b = terms(-6.0, {1.0}, {0.5}, 4);
  CHECK(batch_loss({a}, 0.7) == weighted_loss(a, 0.7));
  CHECK(batch_loss({a, b}, 0.7) == doctest::Approx((weighted_loss(a, 0.7) + weighted_loss(b, 0.7)) / 2).epsilon(1e-15));
  CHECK(batch_loss({a, a}, 0.7) == batch_loss({a}, 0.7));
  CHECK(batch_loss({a, b, a, b}, 0.7) == doctest::Approx(batch_loss({a, b}, 0.7)).epsilon(1e-15));
  CHECK_THROWS_AS(batch_loss({a, terms(-1.0, {0.0}, {0.0}, 5)}, 0.0), ContractError);
  CHECK_THROWS_AS(batch_loss({}, 0.0), ContractError);
}
