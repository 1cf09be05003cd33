// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "distributions.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "ops.hpp"

using namespace hfsgm;

namespace {

DiagGaussian scalar_gaussian(double mean, double log_var) {
  return DiagGaussian(Tensor({1}, mean), Tensor({1}, log_var));
}

}  // namespace

TEST_CASE("rsample closed-form cases") {
  Tensor n({3}, std::vector<double>{0.3, -1.2, 2.0});
  auto r = rsample(DiagGaussian::standard({3}), n);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r[i] == n[i]);

  // log_var far below the clamp collapses to mu + e^-5 * n
  auto near = rsample(DiagGaussian(Tensor({1}, 4.0), Tensor({1}, -1e6)), Tensor({1}, 1.0));
  CHECK(near[0] == doctest::Approx(4.0 + std::exp(-5.0)).epsilon(1e-14));

  auto two = rsample(scalar_gaussian(1.0, std::log(4.0)), Tensor({1}, 0.5));
  CHECK(two[0] == doctest::Approx(2.0).epsilon(1e-14));

  CHECK_THROWS_AS(rsample(DiagGaussian::standard({2}), Tensor({3})), ContractError);
}

TEST_CASE("log_var is clamped on construction") {
  DiagGaussian g(Tensor({2}, 0.0), Tensor({2}, std::vector<double>{-50.0, 50.0}));
  CHECK(g.log_var()[0] == kLogVarMin);
  CHECK(g.log_var()[1] == kLogVarMax);
  CHECK_THROWS_AS(DiagGaussian(Tensor({2}), Tensor({3})), ContractError);
}

TEST_CASE("KL closed-form cases") {
  auto p = scalar_gaussian(0.0, 0.0);
  CHECK(kl_diag_gaussian(p, p) == 0.0);
  CHECK(kl_diag_gaussian(scalar_gaussian(1.0, 0.0), p) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(kl_diag_gaussian(scalar_gaussian(0.0, std::log(4.0)), p) ==
        doctest::Approx(0.5 * (4.0 - 1.0 - std::log(4.0))).epsilon(1e-14));
  CHECK(0.5 * (4.0 - 1.0 - std::log(4.0)) == doctest::Approx(0.80685).epsilon(1e-5));
  CHECK_THROWS_AS(kl_diag_gaussian(DiagGaussian::standard({2}), DiagGaussian::standard({1})), ContractError);
}

TEST_CASE("KL is nonnegative and zero only at equality") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(6));
    Tensor mq({d}), lq({d}), mp({d}), lp({d});
    for (int i = 0; i < d; ++i) {
      mq[i] = 3 * rng.normal();
      lq[i] = 2 * rng.normal();
      mp[i] = 3 * rng.normal();
      lp[i] = 2 * rng.normal();
    }
    DiagGaussian q(mq, lq), p(mp, lp);
    CHECK(kl_diag_gaussian(q, p) > 1e-9);
    CHECK(std::abs(kl_diag_gaussian(q, q)) <= 1e-9);
  }
}

TEST_CASE("Bernoulli log-likelihood") {
  BernoulliImage zero(Tensor({4, 4}, 0.0));
  Tensor x({16});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i % 3 == 0);
  CHECK(bernoulli_log_prob(zero, x.data()) == doctest::Approx(-16 * std::log(2.0)).epsilon(1e-14));

  BernoulliImage confident(Tensor({2, 2}, 20.0));
  Tensor ones({4}, 1.0);
  const double lp = bernoulli_log_prob(confident, ones.data());
  CHECK(lp == doctest::Approx(-4 * std::log1p(std::exp(-20.0))).epsilon(1e-12));
  CHECK(lp / 4 == doctest::Approx(-2.06e-9).epsilon(1e-2));

  BernoulliImage single(Tensor({1}, std::log(3.0)));
  CHECK(bernoulli_log_prob(single, ones.data().subspan(0, 1)) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
  CHECK(std::log(0.75) == doctest::Approx(-0.28768).epsilon(1e-5));

  Tensor bad({1}, 0.5);
  CHECK_THROWS_AS(bernoulli_log_prob(single, bad.data()), ContractError);
  CHECK_THROWS_AS(bernoulli_log_prob(single, ones.data()), ContractError);
  CHECK_THROWS_AS(BernoulliImage(Tensor({1}, std::nan(""))), ContractError);
}

TEST_CASE("Gaussian log density") {
  Tensor zero({1}, 0.0);
  CHECK(gaussian_log_prob(scalar_gaussian(0, 0), zero.data()) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));
  CHECK(-0.5 * std::log(2 * std::numbers::pi) == doctest::Approx(-0.91894).epsilon(1e-5));
  Tensor mu({1}, 1.7);
  CHECK(gaussian_log_prob(scalar_gaussian(1.7, std::log(2.5)), mu.data()) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 2.5)).epsilon(1e-14));
  CHECK(gaussian_log_prob(scalar_gaussian(0, std::log(3.0)), zero.data()) ==
        doctest::Approx(-0.5 * std::log(6 * std::numbers::pi)).epsilon(1e-14));
  CHECK(-0.5 * std::log(6 * std::numbers::pi) == doctest::Approx(-1.46824).epsilon(1e-5));
}

TEST_CASE("Gaussian density integrates to one") {
  for (double lv : {-2.0, 0.0, 1.3}) {
    const double mu = 0.7;
    const double sd = std::exp(0.5 * lv);
    const int n = 20000;
    const double a = mu - 8 * sd, b = mu + 8 * sd, h = (b - a) / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
      double x = a + i * h;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      total += w * std::exp(gaussian_log_prob(scalar_gaussian(mu, lv), std::span<const double>(&x, 1)));
    }
    CHECK(std::abs(total * h - 1.0) <= 1e-4);
  }
}

TEST_CASE("rsample derivatives match finite differences") {
  Rng rng(5);
  Tensor mean({4}), log_var({4}), noise({4});
  for (int i = 0; i < 4; ++i) {
    mean[i] = rng.normal();
    log_var[i] = rng.normal();
    noise[i] = rng.normal();
  }
  for (int coord = 0; coord < 4; ++coord) {
    Tensor gm, gl;
    ad::Tape tape;
    ad::Var s = ad::rsample(tape.parameter(mean, &gm), tape.parameter(log_var, &gl), noise);
    Tensor pick({4}, 0.0);
    pick[coord] = 1.0;
    tape.backward(ad::sum(ad::mul(s, tape.constant(pick))));
    CHECK(gm[coord] == 1.0);
    const double sigma = std::exp(0.5 * log_var[coord]);
    CHECK(gl[coord] == doctest::Approx(0.5 * sigma * noise[coord]).epsilon(1e-14));
    auto f = [&] { return rsample(DiagGaussian(mean, log_var), noise)[coord]; };
    CHECK(testing::check_gradient(mean, gm, f, 1e-5).worst_rel <= 1e-5);
    CHECK(testing::check_gradient(log_var, gl, f, 1e-5).worst_rel <= 1e-5);
  }
}
