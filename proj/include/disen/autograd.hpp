#pragma once

// Tape-based reverse-mode autodiff over Tensor.
//
// Usage pattern: model structs own their weights as `Param` members and
// register them once with a ParamRegistry (which assigns stable indices).
// Each forward pass builds a fresh Tape; `tape.param(p)` introduces a leaf
// whose gradient is later accumulated into an external per-index grad buffer
// via `add_param_grads`. Repeated uses of the same Param in one tape share a
// single leaf node, so weight sharing (e.g. one query matrix applied to every
// feature block) needs no special handling.
//
// Determinism: node construction order is fixed by the forward code, backward
// walks nodes in reverse creation order, and every kernel invoked is
// thread-count invariant, so gradients are bit-identical across runs and
// OMP_NUM_THREADS settings.

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "disen/tensor.hpp"

namespace disen::ad {

using VarId = int;

// A trainable tensor. `id` is assigned by ParamRegistry::add and stays -1 for
// weights that are never registered (useful in small tests).
struct Param {
    Tensor w;
    int id = -1;

    Param() = default;
    explicit Param(std::vector<int> shape) : w(std::move(shape)) {}
};

class ParamRegistry {
public:
    int add(Param& p) {
        p.id = static_cast<int>(items_.size());
        items_.push_back(&p);
        return p.id;
    }

    std::size_t size() const { return items_.size(); }
    Param& at(int i) { return *items_.at(static_cast<std::size_t>(i)); }
    const Param& at(int i) const { return *items_.at(static_cast<std::size_t>(i)); }

    // One zeroed gradient (or moment) buffer per registered param.
    std::vector<Tensor> make_buffers() const {
        std::vector<Tensor> out;
        out.reserve(items_.size());
        for (const Param* p : items_) out.push_back(Tensor::zeros_like(p->w));
        return out;
    }

private:
    std::vector<Param*> items_;
};

enum class Op {
    input,
    param,
    matmul,       // C = A B
    matmul_nt,    // C = A B^T
    add,          // same shape
    sub,          // same shape
    scale,        // c * X, c constant
    add_row,      // [m,n] + row vector (numel n)
    conv2d,       // in: x, w, (bias); attr i0 = stride
    silu,
    groupnorm,    // in: x, gamma, beta; i0 = groups, a0 = eps
    layernorm,    // in: x, gamma, beta; a0 = eps
    softmax,      // row-wise
    chw2rows,     // [C,H,W] -> [H*W, C]
    rows2chw,     // [H*W, C] -> [C,H,W]; i0 = height, i1 = width
    upsample2x,
    concat_rows,  // stack rows of A over rows of B
    slice_rows,   // rows [i0, i0+i1)
    mean_rows,    // [m,n] -> [1,n]
    normalize_rows,  // L2-normalize each row
    scale_rows,   // X[i,:] * mask[i], mask constant
    add_chan_bias,   // [C,H,W] + bias[C]
    sum_mul,      // scalar = sum(A ⊙ B)
    abs_val,      // scalar |x|, subgradient 0 at 0
    mul,          // elementwise, same shape
};

struct Node {
    Op op;
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::array<VarId, 3> in{-1, -1, -1};
    int param_index = -1;
    int i0 = 0, i1 = 0;
    double a0 = 0.0;
    Tensor aux0, aux1;  // saved statistics (mean / rstd / norms)
    Tensor cmask;       // constant multiplier for scale_rows
};

class Tape {
public:
    // --- leaves -----------------------------------------------------------
    VarId input(Tensor v);
    VarId param(const Param& p);

    // --- ops ---------------------------------------------------------------
    VarId matmul(VarId a, VarId b);
    VarId matmul_nt(VarId a, VarId b);
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId scale(VarId x, double c);
    VarId add_row(VarId x, VarId row);
    VarId conv2d(VarId x, VarId w, VarId bias, int stride);  // bias may be -1
    VarId silu(VarId x);
    VarId groupnorm(VarId x, VarId gamma, VarId beta, int groups, double eps);
    VarId layernorm(VarId x, VarId gamma, VarId beta, double eps);
    VarId softmax_rows(VarId x);
    VarId chw_to_rows(VarId x);
    VarId rows_to_chw(VarId x, int height, int width);
    VarId upsample2x(VarId x);
    VarId concat_rows(VarId a, VarId b);
    VarId slice_rows(VarId x, int start, int count);
    VarId mean_rows(VarId x);
    VarId normalize_rows(VarId x);
    VarId scale_rows(VarId x, Tensor row_mask);
    VarId add_chan_bias(VarId x, VarId bias);
    VarId sum_mul(VarId a, VarId b);
    VarId abs_val(VarId x);
    VarId mul(VarId a, VarId b);

    // --- composites ---------------------------------------------------------
    // Linear layer y = x W (+ b). `bias` may be -1.
    VarId linear(VarId x, VarId w, VarId bias);
    // Scaled dot-product attention softmax(q k^T / sqrt(d)) v.
    VarId attention(VarId q, VarId k, VarId v);
    // Mean squared error over all elements: mean((a-b)^2).
    VarId mse(VarId a, VarId b);
    // Cosine similarity of two vectors (any shape, flattened).
    VarId cosine(VarId a, VarId b);

    // --- execution ----------------------------------------------------------
    const Tensor& value(VarId v) const { return nodes_[static_cast<std::size_t>(v)].value; }
    const Tensor& grad(VarId v) const { return nodes_[static_cast<std::size_t>(v)].grad; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be scalar.
    void backward(VarId loss);

    // Adds each param leaf's gradient into grads[param.id]. Leaves whose Param
    // was never registered (id -1) keep their gradient on the tape only.
    void add_param_grads(std::vector<Tensor>& grads) const;

private:
    VarId push(Node n);
    Tensor& grad_buf(VarId v);

    std::vector<Node> nodes_;
    std::unordered_map<const Param*, VarId> param_nodes_;
};

}  // namespace disen::ad
