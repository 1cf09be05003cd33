// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include <functional>

#include "doctest.h"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "ops.hpp"
#include "rng.hpp"

using namespace hfsgm;
using namespace hfsgm::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d/d(inputs) of sum(w * build(inputs)) with a fixed random w.
void expect_gradients(std::vector<Tensor> inputs, const Builder& build, double tol = 1e-6) {
  Rng rng(99);
  Tensor weights;
  auto evaluate = [&](std::vector<Tensor*> sinks) {
    Tape tape;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.parameter(inputs[i], sinks[i]));
    Var out = build(tape, vars);
    if (weights.shape() != out.shape()) weights = random_tensor(out.shape(), rng);
    Var loss = sum(mul(out, tape.constant(weights)));
    if (sinks[0] != nullptr) tape.backward(loss);
    return loss.scalar();
  };
  std::vector<Tensor> grads(inputs.size());
  std::vector<Tensor*> sinks;
  for (auto& g : grads) sinks.push_back(&g);
  evaluate(sinks);
  std::vector<Tensor*> none(inputs.size(), nullptr);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (grads[i].shape() != inputs[i].shape()) grads[i] = Tensor(inputs[i].shape(), 0.0);
    auto r = testing::check_gradient(inputs[i], grads[i], [&] { return evaluate(none); }, tol);
    CAPTURE(i);
    CHECK(r.worst_rel <= tol);
  }
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  expect_gradients({a, b}, [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); });
  expect_gradients({a, b}, [](Tape&, const std::vector<Var>& v) { return sub(v[0], v[1]); });
  expect_gradients({a, b}, [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return elu(scale(v[0], 1.7)); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return sum_rows(v[0]); });
}

TEST_CASE("shape and pooling ops match finite differences") {
  Rng rng(2);
  auto a = random_tensor({6, 3}, rng);
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return group_mean(v[0], 3); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return group_max(v[0], 2); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return group_softmax(v[0], 3); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return repeat_rows(v[0], 2); });
  expect_gradients({a}, [](Tape&, const std::vector<Var>& v) { return gather_rows(v[0], {5, 0, 0, 2}); });
  expect_gradients({a, random_tensor({2, 3}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return concat_rows({v[0], v[1]}); });
}

TEST_CASE("attention helpers match finite differences") {
  Rng rng(3);
  auto a = random_tensor({4, 6}, rng), b = random_tensor({4, 6}, rng), w = random_tensor({4, 2}, rng);
  expect_gradients({a, b}, [](Tape&, const std::vector<Var>& v) { return head_dot(v[0], v[1], 2, 0.5); });
  expect_gradients({a, w}, [](Tape&, const std::vector<Var>& v) { return head_weight(v[0], v[1], 2); });
}

TEST_CASE("linear and convolution layers match finite differences") {
  Rng rng(4);
  expect_gradients({random_tensor({3, 5}, rng), random_tensor({4, 5}, rng), random_tensor({4}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); });
  expect_gradients({random_tensor({2, 2, 7, 7}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 2, 1); });
  expect_gradients({random_tensor({2, 3, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({2}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return conv_transpose2d(v[0], v[1], v[2], 2, 1, 7, 7); });
  expect_gradients({random_tensor({2, 3, 4, 4}, rng), random_tensor({2, 3}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return add_channel_bias(v[0], v[1]); });
  expect_gradients({random_tensor({2, 3, 4, 4}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return avg_pool(v[0], 2); });
  expect_gradients({random_tensor({2, 3, 2, 2}, rng)},
                   [](Tape&, const std::vector<Var>& v) { return upsample_nearest(v[0], 2); });
}

TEST_CASE("batch norm gradients in training and eval mode") {
  Rng rng(5);
  for (bool training : {true, false}) {
    Tensor rm({3}, 0.1), rv({3}, 1.5);
    expect_gradients({random_tensor({4, 3, 2, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
                     [&](Tape&, const std::vector<Var>& v) {
                       Tensor m = rm, s = rv;
                       return batch_norm(v[0], v[1], v[2], m, s, training);
                     },
                     1e-5);
  }
}

TEST_CASE("fused probability terms match finite differences") {
  Rng rng(6);
  auto m = random_tensor({3, 4}, rng), l = random_tensor({3, 4}, rng, 0.5);
  auto m2 = random_tensor({3, 4}, rng), l2 = random_tensor({3, 4}, rng, 0.5);
  auto noise = random_tensor({3, 4}, rng);
  expect_gradients({m, l}, [&](Tape&, const std::vector<Var>& v) { return rsample(v[0], v[1], noise); });
  expect_gradients({m, l, m2, l2},
                   [](Tape&, const std::vector<Var>& v) { return kl_rows(v[0], v[1], v[2], v[3]); });
  expect_gradients({m2, m, l},
                   [](Tape&, const std::vector<Var>& v) { return gaussian_rows(v[0], v[1], v[2]); });
  Tensor targets({3, 4});
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<double>(i % 2);
  expect_gradients({m}, [&](Tape&, const std::vector<Var>& v) { return bernoulli_rows(v[0], targets); });
}

TEST_CASE("group softmax columns sum to one") {
  Tape tape;
  Rng rng(7);
  Var s = group_softmax(tape.constant(random_tensor({12, 3}, rng, 10.0)), 4);
  for (int t = 0; t < 3; ++t) {
    for (int c = 0; c < 3; ++c) {
      double total = 0.0;
      for (int k = 0; k < 4; ++k) total += s.value().row(t * 4 + k)[static_cast<std::size_t>(c)];
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("max pooling routes tied gradients to the lowest index") {
  Tape tape;
  Tensor x({3, 1}, 2.0);
  Tensor grad;
  Var v = tape.parameter(x, &grad);
  tape.backward(sum(group_max(v, 3)));
  CHECK(grad[0] == 1.0);
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 0.0);
}

TEST_CASE("contract errors on malformed shapes") {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  CHECK_THROWS_AS(add(a, b), ContractError);
  CHECK_THROWS_AS(group_mean(a, 3), ContractError);
  CHECK_THROWS_AS(tape.backward(a), ContractError);
}

TEST_CASE("transposed convolution reaches encoder stage sizes") {
  Tape tape;
  Var x = tape.constant(Tensor({1, 2, 4, 4}, 1.0));
  Var w = tape.constant(Tensor({2, 1, 3, 3}, 1.0));
  CHECK(conv_transpose2d(x, w, Var(), 2, 1, 7, 7).shape() == Shape{1, 1, 7, 7});
  CHECK(conv_transpose2d(tape.constant(Tensor({1, 2, 7, 7})), w, Var(), 2, 1, 14, 14).shape() ==
        Shape{1, 1, 14, 14});
  CHECK_THROWS_AS(conv_transpose2d(x, w, Var(), 2, 1, 10, 10), ContractError);
}
