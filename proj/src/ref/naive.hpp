#pragma once

// Naive serial reference implementations, kept deliberately independent of the
// OpenMP kernels: every output element is computed by a direct textbook gather
// (sum over the definition of the op), single-threaded, with no loop-order or
// accumulation tricks shared with src/kernels.cpp. They exist as oracles for
// the kernel tests and as the serial baseline in the benchmark tool.

#include "disen/tensor.hpp"

namespace disen::ref {

// c[i][j] = sum_k a[i][k] * b[k][j]
Tensor matmul(const Tensor& a, const Tensor& b);
// c[i][j] = sum_k a[i][k] * b[j][k]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// c[i][j] = sum_m a[m][i] * b[m][j]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Direct convolution by definition: out[oc][oy][ox] = b[oc] +
//   sum_{ic,ky,kx} w[oc][ic][ky][kx] * x[ic][oy*stride+ky-pad][ox*stride+kx-pad]
// with zero padding pad = ksize/2 (out-of-range input reads contribute 0).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);

Tensor upsample2x(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor groupnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps);

// Single-head scaled dot-product attention by definition:
//   A = softmax(q k^T / sqrt(d)), out = A v   (q:[m,d], k:[n,d], v:[n,dv])
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace disen::ref
