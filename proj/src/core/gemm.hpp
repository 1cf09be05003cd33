// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Dense row-major matrix products, accumulating into C.

#pragma once

namespace hfsgm::gemm {

/// C[M,N] += A[M,K] * B[K,N]
void nn(int m, int n, int k, const double* a, const double* b, double* c);
/// C[M,N] += A[K,M]^T * B[K,N]
void tn(int m, int n, int k, const double* a, const double* b, double* c);
/// C[M,N] += A[M,K] * B[N,K]^T
void nt(int m, int n, int k, const double* a, const double* b, double* c);

}  // namespace hfsgm::gemm
