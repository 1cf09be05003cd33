// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemm.hpp"

#include <algorithm>
#include <cstddef>

namespace hfsgm::gemm {

namespace {

constexpr int kColBlock = 256;
constexpr int kDepthBlock = 256;

inline std::size_t at(int r, int cols, int c) {
  return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
}

}  // namespace

// Four rows of C share every load of a B row.
void nn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int j0 = 0; j0 < n; j0 += kColBlock) {
    const int j1 = std::min(n, j0 + kColBlock);
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      double* c0 = c + at(i, n, 0);
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      for (int p = 0; p < k; ++p) {
        const double a0 = a[at(i, k, p)], a1 = a[at(i + 1, k, p)];
        const double a2 = a[at(i + 2, k, p)], a3 = a[at(i + 3, k, p)];
        const double* br = b + at(p, n, 0);
        for (int j = j0; j < j1; ++j) {
          const double bv = br[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      double* cr = c + at(i, n, 0);
      for (int p = 0; p < k; ++p) {
        const double av = a[at(i, k, p)];
        const double* br = b + at(p, n, 0);
        for (int j = j0; j < j1; ++j) cr[j] += av * br[j];
      }
    }
  }
}

void tn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int j0 = 0; j0 < n; j0 += kColBlock) {
    const int j1 = std::min(n, j0 + kColBlock);
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      double* c0 = c + at(i, n, 0);
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      for (int p = 0; p < k; ++p) {
        const double* ar = a + at(p, m, i);
        const double a0 = ar[0], a1 = ar[1], a2 = ar[2], a3 = ar[3];
        const double* br = b + at(p, n, 0);
        for (int j = j0; j < j1; ++j) {
          const double bv = br[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      double* cr = c + at(i, n, 0);
      for (int p = 0; p < k; ++p) {
        const double av = a[at(p, m, i)];
        const double* br = b + at(p, n, 0);
        for (int j = j0; j < j1; ++j) cr[j] += av * br[j];
      }
    }
  }
}

void nt(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int p0 = 0; p0 < k; p0 += kDepthBlock) {
    const int len = std::min(k, p0 + kDepthBlock) - p0;
    for (int i = 0; i < m; ++i) {
      const double* ar = a + at(i, k, p0);
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        const double* b0 = b + at(j, k, p0);
        const double* b1 = b0 + k;
        const double* b2 = b1 + k;
        const double* b3 = b2 + k;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (int p = 0; p < len; ++p) {
          const double av = ar[p];
          s0 += av * b0[p];
          s1 += av * b1[p];
          s2 += av * b2[p];
          s3 += av * b3[p];
        }
        double* cr = c + at(i, n, j);
        cr[0] += s0;
        cr[1] += s1;
        cr[2] += s2;
        cr[3] += s3;
      }
      for (; j < n; ++j) {
        const double* br = b + at(j, k, p0);
        double s = 0.0;
        for (int p = 0; p < len; ++p) s += ar[p] * br[p];
        c[at(i, n, j)] += s;
      }
    }
  }
}

}  // namespace hfsgm::gemm
