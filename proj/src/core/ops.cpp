// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "distributions.hpp"
#include "errors.hpp"
#include "gemm.hpp"

namespace hfsgm::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
}

void require_group(const Var& a, int group, const char* op) {
  if (group < 1 || a.rank() < 1 || a.rows() % group != 0 || a.rows() == 0) {
    throw ContractError(std::string(op) + ": " + std::to_string(a.rows()) +
                        " rows cannot be split into groups of " + std::to_string(group));
  }
}

Shape with_rows(const Shape& s, int rows) {
  Shape out = s;
  out[0] = rows;
  return out;
}

template <class F>
Var unary(const Var& a, Tensor value, F&& local_grad) {
  const int ia = a.id();
  return a.tape().record(std::move(value), {a},
                         [ia, local_grad](Tape& t, const Tensor& g) {
                           if (!t.requires_grad(ia)) return;
                           Tensor& ga = t.grad(ia);
                           const Tensor& x = t.value(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * local_grad(x[i]);
                         });
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    for (int id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gx = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad(ia);
      const Tensor& y = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gy = t.grad(ib);
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return unary(a, std::move(out), [s](double) { return s; });
}

Var elu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0 ? v : std::expm1(v);
  return unary(a, std::move(out), [](double x) { return x > 0 ? 1.0 : std::exp(x); });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return unary(a, std::move(out), [lo, hi](double x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------- reductions

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const int ia = a.id();
  return a.tape().record(Tensor({1}, s), {a}, [ia](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    for (double& v : t.grad(ia).data()) v += g[0];
  });
}

Var sum_rows(const Var& a) {
  const int n = a.rows();
  Tensor out({n}, 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : a.value().row(r)) s += v;
    out[static_cast<std::size_t>(r)] = s;
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (int r = 0; r < n; ++r) {
      for (double& v : ga.row(r)) v += g[static_cast<std::size_t>(r)];
    }
  });
}

// ---------------------------------------------------------------- shape

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var repeat_rows(const Var& a, int group) {
  if (group < 1) throw ContractError("repeat_rows: group must be >= 1");
  const int rows = a.rows();
  Tensor out(with_rows(a.shape(), rows * group));
  for (int r = 0; r < rows; ++r) {
    auto src = a.value().row(r);
    for (int s = 0; s < group; ++s) std::copy(src.begin(), src.end(), out.row(r * group + s).begin());
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, group](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (int r = 0; r < rows; ++r) {
      auto dst = ga.row(r);
      for (int s = 0; s < group; ++s) {
        auto src = g.row(r * group + s);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  });
}

Var gather_rows(const Var& a, std::vector<int> idx) {
  Tensor out(with_rows(a.shape(), static_cast<int>(idx.size())));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) throw ContractError("gather_rows: index out of range");
    auto src = a.value().row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = ga.row(idx[i]);
      auto src = g.row(static_cast<int>(i));
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  });
}

Var slice_rows(const Var& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ContractError("slice_rows: range out of bounds");
  }
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
  return gather_rows(a, std::move(idx));
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Tape& tape = parts.front().tape();
  const std::size_t rs = parts.front().row_size();
  int rows = 0;
  for (const Var& p : parts) {
    if (&p.tape() != &tape || p.row_size() != rs) throw ContractError("concat_rows: incompatible inputs");
    rows += p.rows();
  }
  Tensor out(with_rows(parts.front().shape(), rows));
  std::vector<std::pair<int, std::size_t>> slices;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(off));
    slices.emplace_back(p.id(), off);
    off += p.value().size();
  }
  return tape.record(std::move(out), parts, [slices = std::move(slices)](Tape& t, const Tensor& g) {
    for (const auto& [id, start] : slices) {
      if (!t.requires_grad(id)) continue;
      Tensor& gi = t.grad(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[start + i];
    }
  });
}

// ---------------------------------------------------------------- pooling

Var group_sum(const Var& a, int group) {
  require_group(a, group, "group_sum");
  const int sets = a.rows() / group;
  Tensor out(with_rows(a.shape(), sets), 0.0);
  for (int t = 0; t < sets; ++t) {
    auto dst = out.row(t);
    for (int s = 0; s < group; ++s) {
      auto src = a.value().row(t * group + s);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, sets, group](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    for (int k = 0; k < sets; ++k) {
      auto src = g.row(k);
      for (int s = 0; s < group; ++s) {
        auto dst = ga.row(k * group + s);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  });
}

Var group_mean(const Var& a, int group) { return scale(group_sum(a, group), 1.0 / group); }

Var group_max(const Var& a, int group) {
  require_group(a, group, "group_max");
  const int sets = a.rows() / group;
  const std::size_t rs = a.row_size();
  Tensor out(with_rows(a.shape(), sets));
  std::vector<int> argmax(static_cast<std::size_t>(sets) * rs, 0);
  for (int t = 0; t < sets; ++t) {
    for (std::size_t i = 0; i < rs; ++i) {
      int best = 0;
      double bv = a.value().row(t * group)[i];
      for (int s = 1; s < group; ++s) {
        const double v = a.value().row(t * group + s)[i];
        if (v > bv) {
          bv = v;
          best = s;
        }
      }
      out.row(t)[i] = bv;
      argmax[static_cast<std::size_t>(t) * rs + i] = best;
    }
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, sets, group, rs, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                           if (!t.requires_grad(ia)) return;
                           Tensor& ga = t.grad(ia);
                           for (int k = 0; k < sets; ++k) {
                             for (std::size_t i = 0; i < rs; ++i) {
                               const int s = argmax[static_cast<std::size_t>(k) * rs + i];
                               ga.row(k * group + s)[i] += g.row(k)[i];
                             }
                           }
                         });
}

Var group_softmax(const Var& a, int group) {
  require_group(a, group, "group_softmax");
  const int sets = a.rows() / group;
  const std::size_t cols = a.row_size();
  Tensor out(a.shape());
  for (int t = 0; t < sets; ++t) {
    for (std::size_t c = 0; c < cols; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < group; ++s) m = std::max(m, a.value().row(t * group + s)[c]);
      double z = 0.0;
      for (int s = 0; s < group; ++s) {
        const double e = std::exp(a.value().row(t * group + s)[c] - m);
        out.row(t * group + s)[c] = e;
        z += e;
      }
      for (int s = 0; s < group; ++s) out.row(t * group + s)[c] /= z;
    }
  }
  const int ia = a.id();
  const int io = a.tape().next_id();
  return a.tape().record(std::move(out), {a}, [ia, io, sets, group, cols](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad(ia);
    const Tensor& y = t.value(io);
    for (int k = 0; k < sets; ++k) {
      for (std::size_t c = 0; c < cols; ++c) {
        double dot = 0.0;
        for (int s = 0; s < group; ++s) dot += g.row(k * group + s)[c] * y.row(k * group + s)[c];
        for (int s = 0; s < group; ++s) {
          const double ys = y.row(k * group + s)[c];
          ga.row(k * group + s)[c] += ys * (g.row(k * group + s)[c] - dot);
        }
      }
    }
  });
}

// ---------------------------------------------------------------- attention

Var head_dot(const Var& a, const Var& b, int heads, double factor) {
  require_same_shape(a, b, "head_dot");
  const int n = a.rows();
  const std::size_t rs = a.row_size();
  if (heads < 1 || rs % static_cast<std::size_t>(heads) != 0) {
    throw ContractError("head_dot: row size " + std::to_string(rs) + " not divisible by " +
                        std::to_string(heads) + " heads");
  }
  const std::size_t dh = rs / static_cast<std::size_t>(heads);
  Tensor out({n, heads});
  for (int r = 0; r < n; ++r) {
    auto x = a.value().row(r);
    auto y = b.value().row(r);
    for (int h = 0; h < heads; ++h) {
      double s = 0.0;
      for (std::size_t i = 0; i < dh; ++i) s += x[h * dh + i] * y[h * dh + i];
      out.row(r)[static_cast<std::size_t>(h)] = s * factor;
    }
  }
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, n, heads, dh, factor](Tape& t, const Tensor& g) {
    const Tensor& xa = t.value(ia);
    const Tensor& xb = t.value(ib);
    for (int r = 0; r < n; ++r) {
      for (int h = 0; h < heads; ++h) {
        const double gh = g.row(r)[static_cast<std::size_t>(h)] * factor;
        if (t.requires_grad(ia)) {
          auto d = t.grad(ia).row(r);
          for (std::size_t i = 0; i < dh; ++i) d[h * dh + i] += gh * xb.row(r)[h * dh + i];
        }
        if (t.requires_grad(ib)) {
          auto d = t.grad(ib).row(r);
          for (std::size_t i = 0; i < dh; ++i) d[h * dh + i] += gh * xa.row(r)[h * dh + i];
        }
      }
    }
  });
}

Var head_weight(const Var& v, const Var& w, int heads) {
  const int n = v.rows();
  const std::size_t rs = v.row_size();
  if (w.rows() != n || w.row_size() != static_cast<std::size_t>(heads) ||
      rs % static_cast<std::size_t>(heads) != 0) {
    throw ContractError("head_weight: incompatible shapes " + shape_str(v.shape()) + " and " +
                        shape_str(w.shape()));
  }
  const std::size_t dh = rs / static_cast<std::size_t>(heads);
  Tensor out(v.shape());
  for (int r = 0; r < n; ++r) {
    for (int h = 0; h < heads; ++h) {
      const double wh = w.value().row(r)[static_cast<std::size_t>(h)];
      for (std::size_t i = 0; i < dh; ++i) out.row(r)[h * dh + i] = wh * v.value().row(r)[h * dh + i];
    }
  }
  const int iv = v.id(), iw = w.id();
  return v.tape().record(std::move(out), {v, w}, [iv, iw, n, heads, dh](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(iv);
    const Tensor& xw = t.value(iw);
    for (int r = 0; r < n; ++r) {
      for (int h = 0; h < heads; ++h) {
        if (t.requires_grad(iv)) {
          auto d = t.grad(iv).row(r);
          const double wh = xw.row(r)[static_cast<std::size_t>(h)];
          for (std::size_t i = 0; i < dh; ++i) d[h * dh + i] += wh * g.row(r)[h * dh + i];
        }
        if (t.requires_grad(iw)) {
          double s = 0.0;
          for (std::size_t i = 0; i < dh; ++i) s += g.row(r)[h * dh + i] * xv.row(r)[h * dh + i];
          t.grad(iw).row(r)[static_cast<std::size_t>(h)] += s;
        }
      }
    }
  });
}

// ---------------------------------------------------------------- layers

Var linear(const Var& x, const Var& w, const Var& b) {
  const int n = x.rows();
  const int in = static_cast<int>(x.row_size());
  if (w.rank() != 2 || w.shape()[1] != in) {
    throw ContractError("linear: input width " + std::to_string(in) + " vs weight " + shape_str(w.shape()));
  }
  const int outd = w.shape()[0];
  if (b.valid() && (b.value().size() != static_cast<std::size_t>(outd))) {
    throw ContractError("linear: bias size mismatch");
  }
  Tensor out({n, outd}, 0.0);
  if (b.valid()) {
    for (int r = 0; r < n; ++r) std::copy_n(b.value().data().data(), outd, out.row(r).data());
  }
  gemm::nt(n, outd, in, x.value().data().data(), w.value().data().data(), out.data().data());
  const int ix = x.id(), iw = w.id(), ib = b.valid() ? b.id() : -1;
  auto fn = [ix, iw, ib, n, in, outd](Tape& t, const Tensor& g) {
    if (t.requires_grad(ix)) gemm::nn(n, in, outd, g.data().data(), t.value(iw).data().data(), t.grad(ix).data().data());
    if (t.requires_grad(iw)) gemm::tn(outd, in, n, g.data().data(), t.value(ix).data().data(), t.grad(iw).data().data());
    if (ib >= 0 && t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (int r = 0; r < n; ++r) {
        const double* gr = g.row(r).data();
        for (int o = 0; o < outd; ++o) gb[static_cast<std::size_t>(o)] += gr[o];
      }
    }
  };
  if (b.valid()) return x.tape().record(std::move(out), {x, w, b}, fn);
  return x.tape().record(std::move(out), {x, w}, fn);
}

namespace {

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Range of output columns ow for which ow*stride - pad + kw lies in [0, W).
std::pair<int, int> valid_range(int out, int in, int k_off, int stride, int pad) {
  const int lo_num = pad - k_off;
  const int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = in - 1 + pad - k_off;
  const int hi = hi_num < 0 ? 0 : std::min(out, hi_num / stride + 1);
  return {lo, hi};
}

void add_bias_channels(Tensor& y, const Tensor& b) {
  const int n = y.dim(0), c = y.dim(1);
  const std::size_t hw = static_cast<std::size_t>(y.dim(2)) * static_cast<std::size_t>(y.dim(3));
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < c; ++o) {
      double* p = y.data().data() + (static_cast<std::size_t>(i) * c + o) * hw;
      const double bv = b[static_cast<std::size_t>(o)];
      for (std::size_t k = 0; k < hw; ++k) p[k] += bv;
    }
  }
}

void bias_grad_channels(const Tensor& g, Tensor& gb) {
  const int n = g.dim(0), c = g.dim(1);
  const std::size_t hw = static_cast<std::size_t>(g.dim(2)) * static_cast<std::size_t>(g.dim(3));
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < c; ++o) {
      const double* p = g.data().data() + (static_cast<std::size_t>(i) * c + o) * hw;
      double s = 0.0;
      for (std::size_t k = 0; k < hw; ++k) s += p[k];
      gb[static_cast<std::size_t>(o)] += s;
    }
  }
}

}  // namespace

namespace {

// Unfolds x [N,C,H,W] into cols [C*k*k, N*Ho*Wo]; out-of-image taps are 0.
std::vector<double> im2col(const Tensor& x, int k, int stride, int pad, int Ho, int Wo) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo, NP = P * N;
  std::vector<double> cols(static_cast<std::size_t>(C) * k * k * NP, 0.0);
  const double* xd = x.data().data();
  for (int c = 0; c < C; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      const auto [oh_lo, oh_hi] = valid_range(Ho, H, kh, stride, pad);
      for (int kw = 0; kw < k; ++kw) {
        const auto [ow_lo, ow_hi] = valid_range(Wo, W, kw, stride, pad);
        double* row = cols.data() + ((static_cast<std::size_t>(c) * k + kh) * k + kw) * NP;
        for (int n = 0; n < N; ++n) {
          const double* xp = xd + (static_cast<std::size_t>(n) * C + c) * H * W;
          double* rp = row + n * P;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const double* xr = xp + static_cast<std::size_t>(oh * stride - pad + kh) * W;
            double* rr = rp + static_cast<std::size_t>(oh) * Wo;
            for (int ow = ow_lo; ow < ow_hi; ++ow) rr[ow] = xr[ow * stride - pad + kw];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const std::vector<double>& cols, int k, int stride, int pad, int Ho, int Wo, Tensor& dx) {
  const int N = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo, NP = P * N;
  double* xd = dx.data().data();
  for (int c = 0; c < C; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      const auto [oh_lo, oh_hi] = valid_range(Ho, H, kh, stride, pad);
      for (int kw = 0; kw < k; ++kw) {
        const auto [ow_lo, ow_hi] = valid_range(Wo, W, kw, stride, pad);
        const double* row = cols.data() + ((static_cast<std::size_t>(c) * k + kh) * k + kw) * NP;
        for (int n = 0; n < N; ++n) {
          double* xp = xd + (static_cast<std::size_t>(n) * C + c) * H * W;
          const double* rp = row + n * P;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            double* xr = xp + static_cast<std::size_t>(oh * stride - pad + kh) * W;
            const double* rr = rp + static_cast<std::size_t>(oh) * Wo;
            for (int ow = ow_lo; ow < ow_hi; ++ow) xr[ow * stride - pad + kw] += rr[ow];
          }
        }
      }
    }
  }
}

// [N,O,P] <-> [O,N*P]
std::vector<double> to_channel_major(const Tensor& y) {
  const int N = y.dim(0), O = y.dim(1);
  const std::size_t P = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  std::vector<double> m(static_cast<std::size_t>(O) * N * P);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      std::copy_n(y.data().data() + (static_cast<std::size_t>(n) * O + o) * P, P,
                  m.data() + (static_cast<std::size_t>(o) * N + n) * P);
  return m;
}

}  // namespace

void conv_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y) {
  const int N = x.dim(0), C = x.dim(1), O = w.dim(0), k = w.dim(2);
  const int Ho = y.dim(2), Wo = y.dim(3);
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  const int NP = static_cast<int>(P) * N;
  const auto cols = im2col(x, k, stride, pad, Ho, Wo);
  std::vector<double> ym(static_cast<std::size_t>(O) * NP, 0.0);
  gemm::nn(O, NP, C * k * k, w.data().data(), cols.data(), ym.data());
  double* yd = y.data().data();
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) {
      double* yp = yd + (static_cast<std::size_t>(n) * O + o) * P;
      const double* mp = ym.data() + (static_cast<std::size_t>(o) * N + n) * P;
      for (std::size_t i = 0; i < P; ++i) yp[i] += mp[i];
    }
}

void conv_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad, Tensor& dx) {
  const int N = dx.dim(0), C = dx.dim(1), O = w.dim(0), k = w.dim(2);
  const int Ho = dy.dim(2), Wo = dy.dim(3);
  const int NP = Ho * Wo * N;
  const auto gm = to_channel_major(dy);
  std::vector<double> cols(static_cast<std::size_t>(C) * k * k * NP, 0.0);
  gemm::tn(C * k * k, NP, O, w.data().data(), gm.data(), cols.data());
  col2im_add(cols, k, stride, pad, Ho, Wo, dx);
}

void conv_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad, Tensor& dw) {
  const int N = x.dim(0), C = x.dim(1), O = dw.dim(0), k = dw.dim(2);
  const int Ho = dy.dim(2), Wo = dy.dim(3);
  const int NP = Ho * Wo * N;
  const auto cols = im2col(x, k, stride, pad, Ho, Wo);
  const auto gm = to_channel_major(dy);
  gemm::nt(O, C * k * k, NP, gm.data(), cols.data(), dw.data().data());
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4 || w.shape()[1] != x.shape()[1] || w.shape()[2] != w.shape()[3]) {
    throw ContractError("conv2d: incompatible input " + shape_str(x.shape()) + " and weight " +
                        shape_str(w.shape()));
  }
  const int k = w.shape()[2];
  const int Ho = conv_out(x.shape()[2], k, stride, pad);
  const int Wo = conv_out(x.shape()[3], k, stride, pad);
  Tensor y({x.shape()[0], w.shape()[0], Ho, Wo}, 0.0);
  conv_forward(x.value(), w.value(), stride, pad, y);
  if (b.valid()) add_bias_channels(y, b.value());
  const int ix = x.id(), iw = w.id(), ib = b.valid() ? b.id() : -1;
  auto fn = [ix, iw, ib, stride, pad](Tape& t, const Tensor& g) {
    if (t.requires_grad(ix)) conv_backward_input(g, t.value(iw), stride, pad, t.grad(ix));
    if (t.requires_grad(iw)) conv_backward_weight(t.value(ix), g, stride, pad, t.grad(iw));
    if (ib >= 0 && t.requires_grad(ib)) bias_grad_channels(g, t.grad(ib));
  };
  if (b.valid()) return x.tape().record(std::move(y), {x, w, b}, fn);
  return x.tape().record(std::move(y), {x, w}, fn);
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int out_h,
                     int out_w) {
  if (x.rank() != 4 || w.rank() != 4 || w.shape()[0] != x.shape()[1]) {
    throw ContractError("conv_transpose2d: incompatible input " + shape_str(x.shape()) +
                        " and weight " + shape_str(w.shape()));
  }
  const int k = w.shape()[2];
  if (conv_out(out_h, k, stride, pad) != x.shape()[2] || conv_out(out_w, k, stride, pad) != x.shape()[3]) {
    throw ContractError("conv_transpose2d: output size " + std::to_string(out_h) + "x" +
                        std::to_string(out_w) + " unreachable from " + shape_str(x.shape()));
  }
  Tensor y({x.shape()[0], w.shape()[1], out_h, out_w}, 0.0);
  conv_backward_input(x.value(), w.value(), stride, pad, y);
  if (b.valid()) add_bias_channels(y, b.value());
  const int ix = x.id(), iw = w.id(), ib = b.valid() ? b.id() : -1;
  auto fn = [ix, iw, ib, stride, pad](Tape& t, const Tensor& g) {
    if (t.requires_grad(ix)) {
      Tensor dx(t.value(ix).shape(), 0.0);
      conv_forward(g, t.value(iw), stride, pad, dx);
      Tensor& gx = t.grad(ix);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
    }
    if (t.requires_grad(iw)) conv_backward_weight(g, t.value(ix), stride, pad, t.grad(iw));
    if (ib >= 0 && t.requires_grad(ib)) bias_grad_channels(g, t.grad(ib));
  };
  if (b.valid()) return x.tape().record(std::move(y), {x, w, b}, fn);
  return x.tape().record(std::move(y), {x, w}, fn);
}

Var add_channel_bias(const Var& x, const Var& b) {
  if (x.rank() != 4 || b.rank() != 2 || b.shape()[0] != x.shape()[0] || b.shape()[1] != x.shape()[1]) {
    throw ContractError("add_channel_bias: incompatible " + shape_str(x.shape()) + " and " +
                        shape_str(b.shape()));
  }
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t hw = static_cast<std::size_t>(x.shape()[2]) * static_cast<std::size_t>(x.shape()[3]);
  Tensor y = x.value();
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < c; ++o) {
      const double bv = b.value().row(i)[static_cast<std::size_t>(o)];
      double* p = y.data().data() + (static_cast<std::size_t>(i) * c + o) * hw;
      for (std::size_t k = 0; k < hw; ++k) p[k] += bv;
    }
  }
  const int ix = x.id(), ib = b.id();
  return x.tape().record(std::move(y), {x, b}, [ix, ib, n, c, hw](Tape& t, const Tensor& g) {
    if (t.requires_grad(ix)) {
      Tensor& gx = t.grad(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (int i = 0; i < n; ++i) {
        for (int o = 0; o < c; ++o) {
          const double* p = g.data().data() + (static_cast<std::size_t>(i) * c + o) * hw;
          double s = 0.0;
          for (std::size_t k = 0; k < hw; ++k) s += p[k];
          gb.row(i)[static_cast<std::size_t>(o)] += s;
        }
      }
    }
  });
}

Var avg_pool(const Var& x, int factor) {
  if (x.rank() != 4 || factor < 1 || x.shape()[2] % factor != 0 || x.shape()[3] % factor != 0) {
    throw ContractError("avg_pool: factor " + std::to_string(factor) + " does not divide " +
                        shape_str(x.shape()));
  }
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int ho = h / factor, wo = w / factor;
  const double inv = 1.0 / (factor * factor);
  Tensor y({n, c, ho, wo}, 0.0);
  const Tensor& xv = x.value();
  for (int p = 0; p < n * c; ++p) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        y[(static_cast<std::size_t>(p) * ho + i / factor) * wo + j / factor] +=
            inv * xv[(static_cast<std::size_t>(p) * h + i) * w + j];
      }
    }
  }
  const int ix = x.id();
  return x.tape().record(std::move(y), {x}, [ix, n, c, h, w, ho, wo, factor, inv](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    Tensor& gx = t.grad(ix);
    for (int p = 0; p < n * c; ++p) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          gx[(static_cast<std::size_t>(p) * h + i) * w + j] +=
              inv * g[(static_cast<std::size_t>(p) * ho + i / factor) * wo + j / factor];
        }
      }
    }
  });
}

Var upsample_nearest(const Var& x, int factor) {
  if (x.rank() != 4 || factor < 1) throw ContractError("upsample_nearest: invalid input");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int ho = h * factor, wo = w * factor;
  Tensor y({n, c, ho, wo});
  const Tensor& xv = x.value();
  for (int p = 0; p < n * c; ++p) {
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) {
        y[(static_cast<std::size_t>(p) * ho + i) * wo + j] =
            xv[(static_cast<std::size_t>(p) * h + i / factor) * w + j / factor];
      }
    }
  }
  const int ix = x.id();
  return x.tape().record(std::move(y), {x}, [ix, n, c, h, w, ho, wo, factor](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    Tensor& gx = t.grad(ix);
    for (int p = 0; p < n * c; ++p) {
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          gx[(static_cast<std::size_t>(p) * h + i / factor) * w + j / factor] +=
              g[(static_cast<std::size_t>(p) * ho + i) * wo + j];
        }
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum, double eps) {
  if (x.rank() != 2 && x.rank() != 4) throw ContractError("batch_norm: expects rank 2 or 4 input");
  const int n = x.shape()[0], c = x.shape()[1];
  const std::size_t hw = x.rank() == 4 ? static_cast<std::size_t>(x.shape()[2]) * static_cast<std::size_t>(x.shape()[3]) : 1;
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c) ||
      running_mean.size() != static_cast<std::size_t>(c) || running_var.size() != static_cast<std::size_t>(c)) {
    throw ContractError("batch_norm: parameter size does not match channel count");
  }
  const double count = static_cast<double>(n) * static_cast<double>(hw);
  if (training && count < 2) throw ContractError("batch_norm: training mode needs at least 2 values per channel");
  const Tensor& xv = x.value();
  auto at = [c, hw](int i, int ch, std::size_t k) { return (static_cast<std::size_t>(i) * c + ch) * hw + k; };

  Tensor mean({c}), inv_std({c});
  for (int ch = 0; ch < c; ++ch) {
    double m, v;
    if (training) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < hw; ++k) s += xv[at(i, ch, k)];
      m = s / count;
      double ss = 0.0;
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < hw; ++k) {
          const double d = xv[at(i, ch, k)] - m;
          ss += d * d;
        }
      v = ss / count;
      const auto u = static_cast<std::size_t>(ch);
      running_mean[u] = (1 - momentum) * running_mean[u] + momentum * m;
      running_var[u] = (1 - momentum) * running_var[u] + momentum * v * count / (count - 1);
    } else {
      m = running_mean[static_cast<std::size_t>(ch)];
      v = running_var[static_cast<std::size_t>(ch)];
    }
    mean[static_cast<std::size_t>(ch)] = m;
    inv_std[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(v + eps);
  }
  Tensor y(x.shape());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const auto u = static_cast<std::size_t>(ch);
      for (std::size_t k = 0; k < hw; ++k) {
        const std::size_t p = at(i, ch, k);
        y[p] = gamma.value()[u] * (xv[p] - mean[u]) * inv_std[u] + beta.value()[u];
      }
    }
  const int ix = x.id(), ig = gamma.id(), ibt = beta.id();
  return x.tape().record(std::move(y), {x, gamma, beta},
                         [=, mean = std::move(mean), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                           const Tensor& xs = t.value(ix);
                           const Tensor& gm = t.value(ig);
                           for (int ch = 0; ch < c; ++ch) {
                             const auto u = static_cast<std::size_t>(ch);
                             double sum_g = 0.0, sum_gx = 0.0;
                             for (int i = 0; i < n; ++i)
                               for (std::size_t k = 0; k < hw; ++k) {
                                 const std::size_t p = at(i, ch, k);
                                 const double xhat = (xs[p] - mean[u]) * inv_std[u];
                                 sum_g += g[p];
                                 sum_gx += g[p] * xhat;
                               }
                             if (t.requires_grad(ig)) t.grad(ig)[u] += sum_gx;
                             if (t.requires_grad(ibt)) t.grad(ibt)[u] += sum_g;
                             if (!t.requires_grad(ix)) continue;
                             Tensor& gx = t.grad(ix);
                             const double scale_c = gm[u] * inv_std[u];
                             for (int i = 0; i < n; ++i)
                               for (std::size_t k = 0; k < hw; ++k) {
                                 const std::size_t p = at(i, ch, k);
                                 if (training) {
                                   const double xhat = (xs[p] - mean[u]) * inv_std[u];
                                   gx[p] += scale_c * (g[p] - sum_g / count - xhat * sum_gx / count);
                                 } else {
                                   gx[p] += scale_c * g[p];
                                 }
                               }
                           }
                         });
}

// ---------------------------------------------------------------- probability

Var rsample(const Var& mean, const Var& log_var, const Tensor& noise) {
  require_same_shape(mean, log_var, "rsample");
  if (noise.size() != mean.value().size()) {
    throw ContractError("rsample: noise shape " + shape_str(noise.shape()) + " does not match " +
                        shape_str(mean.shape()));
  }
  Tensor out(mean.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mean.value()[i] + std::exp(0.5 * log_var.value()[i]) * noise[i];
  }
  const int im = mean.id(), il = log_var.id();
  return mean.tape().record(std::move(out), {mean, log_var}, [im, il, noise](Tape& t, const Tensor& g) {
    if (t.requires_grad(im)) {
      Tensor& gm = t.grad(im);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (t.requires_grad(il)) {
      Tensor& gl = t.grad(il);
      const Tensor& lv = t.value(il);
      for (std::size_t i = 0; i < g.size(); ++i) gl[i] += g[i] * 0.5 * std::exp(0.5 * lv[i]) * noise[i];
    }
  });
}

Var kl_rows(const Var& mq, const Var& lq, const Var& mp, const Var& lp) {
  require_same_shape(mq, lq, "kl_rows");
  require_same_shape(mq, mp, "kl_rows");
  require_same_shape(mq, lp, "kl_rows");
  const int n = mq.rows();
  const std::size_t rs = mq.row_size();
  Tensor out({n}, 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < rs; ++i) {
      const std::size_t p = static_cast<std::size_t>(r) * rs + i;
      s += kl_term(mq.value()[p], lq.value()[p], mp.value()[p], lp.value()[p]);
    }
    out[static_cast<std::size_t>(r)] = s;
  }
  const int a = mq.id(), b = lq.id(), c = mp.id(), d = lp.id();
  return mq.tape().record(std::move(out), {mq, lq, mp, lp}, [a, b, c, d, rs](Tape& t, const Tensor& g) {
    const Tensor& vmq = t.value(a);
    const Tensor& vlq = t.value(b);
    const Tensor& vmp = t.value(c);
    const Tensor& vlp = t.value(d);
    const bool ga = t.requires_grad(a), gb = t.requires_grad(b), gc = t.requires_grad(c), gd = t.requires_grad(d);
    for (std::size_t p = 0; p < vmq.size(); ++p) {
      const double gr = g[p / rs];
      const double diff = vmq[p] - vmp[p];
      const double ip = std::exp(-vlp[p]);
      const double ratio = std::exp(vlq[p] - vlp[p]);
      if (ga) t.grad(a)[p] += gr * diff * ip;
      if (gb) t.grad(b)[p] += gr * 0.5 * (ratio - 1.0);
      if (gc) t.grad(c)[p] -= gr * diff * ip;
      if (gd) t.grad(d)[p] += gr * 0.5 * (1.0 - ratio - diff * diff * ip);
    }
  });
}

Var gaussian_rows(const Var& x, const Var& mean, const Var& log_var) {
  require_same_shape(x, mean, "gaussian_rows");
  require_same_shape(x, log_var, "gaussian_rows");
  const int n = x.rows();
  const std::size_t rs = x.row_size();
  Tensor out({n}, 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < rs; ++i) {
      const std::size_t p = static_cast<std::size_t>(r) * rs + i;
      s += gaussian_term(x.value()[p], mean.value()[p], log_var.value()[p]);
    }
    out[static_cast<std::size_t>(r)] = s;
  }
  const int a = x.id(), b = mean.id(), c = log_var.id();
  return x.tape().record(std::move(out), {x, mean, log_var}, [a, b, c, rs](Tape& t, const Tensor& g) {
    const Tensor& vx = t.value(a);
    const Tensor& vm = t.value(b);
    const Tensor& vl = t.value(c);
    const bool ga = t.requires_grad(a), gb = t.requires_grad(b), gc = t.requires_grad(c);
    for (std::size_t p = 0; p < vx.size(); ++p) {
      const double gr = g[p / rs];
      const double d = vx[p] - vm[p];
      const double iv = std::exp(-vl[p]);
      if (ga) t.grad(a)[p] -= gr * d * iv;
      if (gb) t.grad(b)[p] += gr * d * iv;
      if (gc) t.grad(c)[p] -= gr * 0.5 * (1.0 - d * d * iv);
    }
  });
}

Var bernoulli_rows(const Var& logits, const Tensor& targets) {
  if (targets.size() != logits.value().size()) {
    throw ContractError("bernoulli_rows: target shape " + shape_str(targets.shape()) +
                        " does not match logits " + shape_str(logits.shape()));
  }
  const int n = logits.rows();
  const std::size_t rs = logits.row_size();
  Tensor out({n}, 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < rs; ++i) {
      const std::size_t p = static_cast<std::size_t>(r) * rs + i;
      s += bernoulli_logit_term(logits.value()[p], targets[p]);
    }
    out[static_cast<std::size_t>(r)] = s;
  }
  const int il = logits.id();
  return logits.tape().record(std::move(out), {logits}, [il, rs, targets](Tape& t, const Tensor& g) {
    if (!t.requires_grad(il)) return;
    Tensor& gl = t.grad(il);
    const Tensor& lv = t.value(il);
    for (std::size_t p = 0; p < lv.size(); ++p) gl[p] += g[p / rs] * (targets[p] - sigmoid(lv[p]));
  });
}

}  // namespace hfsgm::ad
