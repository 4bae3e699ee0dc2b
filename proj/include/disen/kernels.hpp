#pragma once

#include "disen/tensor.hpp"

// Data-parallel kernels. Every loop is partitioned over independent output
// elements and each element is accumulated serially by the thread that owns
// it, so results are bit-identical for any thread count (and identical to a
// serial run). No omp reductions, no atomics.
namespace disen::kern {

// C = A[m,k] * B[k,n]            (acc: C += ...)
void matmul(Tensor& c, const Tensor& a, const Tensor& b, bool acc = false);
// C = A[m,k] * B[n,k]^T
void matmul_nt(Tensor& c, const Tensor& a, const Tensor& b, bool acc = false);
// C = A[m,k1]^T * B[m,k2]
void matmul_tn(Tensor& c, const Tensor& a, const Tensor& b, bool acc = false);

// 2-d convolution on [C,H,W] maps, square kernel of odd size, zero padding
// ksize/2, stride 1 or 2. Bias may be empty.
void conv2d_fwd(Tensor& out, const Tensor& x, const Tensor& w, const Tensor& b, int stride);
void conv2d_bwd_input(Tensor& dx, const Tensor& dout, const Tensor& w, int stride,
                      bool acc = true);
void conv2d_bwd_weight(Tensor& dw, Tensor& db, const Tensor& dout, const Tensor& x, int stride,
                       bool acc = true);

void upsample2x_fwd(Tensor& out, const Tensor& x);
void upsample2x_bwd(Tensor& dx, const Tensor& dout, bool acc = true);

void silu_fwd(Tensor& out, const Tensor& x);
void silu_bwd(Tensor& dx, const Tensor& dout, const Tensor& x, bool acc = true);

void softmax_rows_fwd(Tensor& out, const Tensor& x);
void softmax_rows_bwd(Tensor& dx, const Tensor& dout, const Tensor& y, bool acc = true);

// Row-wise layer norm over the last dimension of a [m,n] matrix.
void layernorm_rows_fwd(Tensor& out, Tensor& mean, Tensor& rstd, const Tensor& x,
                        const Tensor& gamma, const Tensor& beta, double eps);
void layernorm_rows_bwd(Tensor& dx, Tensor& dgamma, Tensor& dbeta, const Tensor& dout,
                        const Tensor& x, const Tensor& gamma, const Tensor& mean,
                        const Tensor& rstd, bool acc = true);

// Group norm over a [C,H,W] map; stats per channel group.
void groupnorm_fwd(Tensor& out, Tensor& mean, Tensor& rstd, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, int groups, double eps);
void groupnorm_bwd(Tensor& dx, Tensor& dgamma, Tensor& dbeta, const Tensor& dout, const Tensor& x,
                   const Tensor& gamma, int groups, const Tensor& mean, const Tensor& rstd,
                   bool acc = true);

// [C,H,W] -> [H*W, C] token layout and back.
void chw_to_rows_fwd(Tensor& out, const Tensor& x);
void chw_to_rows_bwd(Tensor& dx, const Tensor& dout, bool acc = true);

}  // namespace disen::kern
