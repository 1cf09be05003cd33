// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable operations on ad::Var.
//
// Row convention: the first dimension indexes independent items. "Group"
// operations treat consecutive blocks of `group` rows as one set, so a batch
// of T sets of S elements is a [T*S, ...] tensor and pools to [T, ...].

#pragma once

#include <span>
#include <vector>

#include "autodiff.hpp"

namespace hfsgm::ad {

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var elu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Reductions.
Var sum(const Var& a);
/// [N, ...] -> [N]
Var sum_rows(const Var& a);

// Shape.
Var reshape(const Var& a, Shape shape);
/// [T, ...] -> [T*S, ...], row t*S+s = row t.
Var repeat_rows(const Var& a, int group);
/// Row permutation/selection: out row i = a row idx[i].
Var gather_rows(const Var& a, std::vector<int> idx);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int begin, int count);

// Set pooling over groups of rows.
Var group_sum(const Var& a, int group);
Var group_mean(const Var& a, int group);
/// Coordinatewise max; gradient goes to the lowest index among ties.
Var group_max(const Var& a, int group);
/// Softmax over the rows of each group, independently per column.
Var group_softmax(const Var& a, int group);

// Multi-head attention helpers. Rows hold `heads` contiguous blocks.
/// [N, H*Dh] x [N, H*Dh] -> [N, H], per-head dot product times `factor`.
Var head_dot(const Var& a, const Var& b, int heads, double factor);
/// [N, H*Dh] x [N, H] -> [N, H*Dh], each head block scaled by its weight.
Var head_weight(const Var& v, const Var& w, int heads);

// Layers.
/// x [N, in...] (row_size = in), W [out, in], b [out] -> [N, out]
Var linear(const Var& x, const Var& w, const Var& b);
/// x [N,C,H,W], w [O,C,k,k], b [O] -> [N,O,Ho,Wo]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// x [N,Cin,Hi,Wi], w [Cin,Cout,k,k], b [Cout] -> [N,Cout,out_h,out_w]
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int out_h,
                     int out_w);
/// x [N,C,H,W] + b [N,C] broadcast over H,W.
Var add_channel_bias(const Var& x, const Var& b);
Var avg_pool(const Var& x, int factor);
Var upsample_nearest(const Var& x, int factor);

/// Per-channel normalization over (N,H,W). In training mode uses batch
/// statistics and updates the running buffers; otherwise uses them.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

// Fused probability terms.
/// mean + exp(0.5*log_var) * noise
Var rsample(const Var& mean, const Var& log_var, const Tensor& noise);
/// Per-row KL(N(mq, e^lq) || N(mp, e^lp)) -> [N]
Var kl_rows(const Var& mq, const Var& lq, const Var& mp, const Var& lp);
/// Per-row Gaussian log density of x -> [N]
Var gaussian_rows(const Var& x, const Var& mean, const Var& log_var);
/// Per-row Bernoulli log-likelihood of binary targets -> [N]
Var bernoulli_rows(const Var& logits, const Tensor& targets);

// Raw convolution kernels, exposed for tests.
void conv_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y);
void conv_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad, Tensor& dx);
void conv_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad, Tensor& dw);

}  // namespace hfsgm::ad
