#include "disen/autograd.hpp"

#include <cmath>
#include <stdexcept>

#include "disen/kernels.hpp"

namespace disen::ad {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

VarId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(VarId v) {
    Node& n = nodes_[static_cast<std::size_t>(v)];
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

// ---------------------------------------------------------------------------
// leaves
// ---------------------------------------------------------------------------

VarId Tape::input(Tensor v) {
    Node n;
    n.op = Op::input;
    n.value = std::move(v);
    return push(n);
}

VarId Tape::param(const Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    Node n;
    n.op = Op::param;
    n.value = p.w;
    n.param_index = p.id;  // -1 for unregistered params: usable, but no grad export
    VarId v = push(n);
    param_nodes_.emplace(&p, v);
    return v;
}

// ---------------------------------------------------------------------------
// ops: forward
// ---------------------------------------------------------------------------

VarId Tape::matmul(VarId a, VarId b) {
    Node n;
    n.op = Op::matmul;
    n.in = {a, b, -1};
    n.value = Tensor({value(a).rows(), value(b).cols()});
    kern::matmul(n.value, value(a), value(b), false);
    return push(std::move(n));
}

VarId Tape::matmul_nt(VarId a, VarId b) {
    Node n;
    n.op = Op::matmul_nt;
    n.in = {a, b, -1};
    n.value = Tensor({value(a).rows(), value(b).rows()});
    kern::matmul_nt(n.value, value(a), value(b), false);
    return push(std::move(n));
}

VarId Tape::add(VarId a, VarId b) {
    value(a).check_same_shape(value(b), "Tape::add");
    Node n;
    n.op = Op::add;
    n.in = {a, b, -1};
    n.value = value(a);
    n.value.add_inplace(value(b));
    return push(std::move(n));
}

VarId Tape::sub(VarId a, VarId b) {
    value(a).check_same_shape(value(b), "Tape::sub");
    Node n;
    n.op = Op::sub;
    n.in = {a, b, -1};
    n.value = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value[i] -= vb[i];
    return push(std::move(n));
}

VarId Tape::scale(VarId x, double c) {
    Node n;
    n.op = Op::scale;
    n.in = {x, -1, -1};
    n.a0 = c;
    n.value = value(x);
    n.value.scale_inplace(c);
    return push(std::move(n));
}

VarId Tape::add_row(VarId x, VarId row) {
    const Tensor& vx = value(x);
    const Tensor& vr = value(row);
    require(vr.numel() == static_cast<std::size_t>(vx.cols()),
            "Tape::add_row: row length must match columns");
    Node n;
    n.op = Op::add_row;
    n.in = {x, row, -1};
    n.value = vx;
    for (int i = 0; i < vx.rows(); ++i)
        for (int j = 0; j < vx.cols(); ++j) n.value.at(i, j) += vr[static_cast<std::size_t>(j)];
    return push(std::move(n));
}

VarId Tape::conv2d(VarId x, VarId w, VarId bias, int stride) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const int k = vw.dim(2), pad = k / 2;
    const int oh = (vx.height() + 2 * pad - k) / stride + 1;
    const int ow = (vx.width() + 2 * pad - k) / stride + 1;
    Node n;
    n.op = Op::conv2d;
    n.in = {x, w, bias};
    n.i0 = stride;
    n.value = Tensor({vw.dim(0), oh, ow});
    static const Tensor no_bias;
    kern::conv2d_fwd(n.value, vx, vw, bias >= 0 ? value(bias) : no_bias, stride);
    return push(std::move(n));
}

VarId Tape::silu(VarId x) {
    Node n;
    n.op = Op::silu;
    n.in = {x, -1, -1};
    n.value = Tensor::zeros_like(value(x));
    kern::silu_fwd(n.value, value(x));
    return push(std::move(n));
}

VarId Tape::groupnorm(VarId x, VarId gamma, VarId beta, int groups, double eps) {
    Node n;
    n.op = Op::groupnorm;
    n.in = {x, gamma, beta};
    n.i0 = groups;
    n.a0 = eps;
    n.value = Tensor::zeros_like(value(x));
    n.aux0 = Tensor({groups});
    n.aux1 = Tensor({groups});
    kern::groupnorm_fwd(n.value, n.aux0, n.aux1, value(x), value(gamma), value(beta), groups, eps);
    return push(std::move(n));
}

VarId Tape::layernorm(VarId x, VarId gamma, VarId beta, double eps) {
    Node n;
    n.op = Op::layernorm;
    n.in = {x, gamma, beta};
    n.a0 = eps;
    n.value = Tensor::zeros_like(value(x));
    n.aux0 = Tensor({value(x).rows()});
    n.aux1 = Tensor({value(x).rows()});
    kern::layernorm_rows_fwd(n.value, n.aux0, n.aux1, value(x), value(gamma), value(beta), eps);
    return push(std::move(n));
}

VarId Tape::softmax_rows(VarId x) {
    Node n;
    n.op = Op::softmax;
    n.in = {x, -1, -1};
    n.value = Tensor::zeros_like(value(x));
    kern::softmax_rows_fwd(n.value, value(x));
    return push(std::move(n));
}

VarId Tape::chw_to_rows(VarId x) {
    const Tensor& vx = value(x);
    Node n;
    n.op = Op::chw2rows;
    n.in = {x, -1, -1};
    n.value = Tensor({vx.height() * vx.width(), vx.channels()});
    kern::chw_to_rows_fwd(n.value, vx);
    return push(std::move(n));
}

VarId Tape::rows_to_chw(VarId x, int height, int width) {
    const Tensor& vx = value(x);
    require(vx.rows() == height * width, "Tape::rows_to_chw: row count must equal H*W");
    Node n;
    n.op = Op::rows2chw;
    n.in = {x, -1, -1};
    n.i0 = height;
    n.i1 = width;
    n.value = Tensor({vx.cols(), height, width});
    for (int c = 0; c < vx.cols(); ++c)
        for (int y = 0; y < height; ++y)
            for (int xx = 0; xx < width; ++xx) n.value.at(c, y, xx) = vx.at(y * width + xx, c);
    return push(std::move(n));
}

VarId Tape::upsample2x(VarId x) {
    const Tensor& vx = value(x);
    Node n;
    n.op = Op::upsample2x;
    n.in = {x, -1, -1};
    n.value = Tensor({vx.channels(), 2 * vx.height(), 2 * vx.width()});
    kern::upsample2x_fwd(n.value, vx);
    return push(std::move(n));
}

VarId Tape::concat_rows(VarId a, VarId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require(va.cols() == vb.cols(), "Tape::concat_rows: column mismatch");
    Node n;
    n.op = Op::concat_rows;
    n.in = {a, b, -1};
    n.value = Tensor({va.rows() + vb.rows(), va.cols()});
    for (int i = 0; i < va.rows(); ++i)
        for (int j = 0; j < va.cols(); ++j) n.value.at(i, j) = va.at(i, j);
    for (int i = 0; i < vb.rows(); ++i)
        for (int j = 0; j < vb.cols(); ++j) n.value.at(va.rows() + i, j) = vb.at(i, j);
    return push(std::move(n));
}

VarId Tape::slice_rows(VarId x, int start, int count) {
    const Tensor& vx = value(x);
    require(start >= 0 && count > 0 && start + count <= vx.rows(),
            "Tape::slice_rows: range out of bounds");
    Node n;
    n.op = Op::slice_rows;
    n.in = {x, -1, -1};
    n.i0 = start;
    n.i1 = count;
    n.value = Tensor({count, vx.cols()});
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < vx.cols(); ++j) n.value.at(i, j) = vx.at(start + i, j);
    return push(std::move(n));
}

VarId Tape::mean_rows(VarId x) {
    const Tensor& vx = value(x);
    Node n;
    n.op = Op::mean_rows;
    n.in = {x, -1, -1};
    n.value = Tensor({1, vx.cols()});
    for (int j = 0; j < vx.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < vx.rows(); ++i) s += vx.at(i, j);
        n.value.at(0, j) = s / vx.rows();
    }
    return push(std::move(n));
}

VarId Tape::normalize_rows(VarId x) {
    const Tensor& vx = value(x);
    Node n;
    n.op = Op::normalize_rows;
    n.in = {x, -1, -1};
    n.value = Tensor::zeros_like(vx);
    n.aux0 = Tensor({vx.rows()});
    for (int i = 0; i < vx.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < vx.cols(); ++j) s += vx.at(i, j) * vx.at(i, j);
        const double nrm = std::sqrt(s + 1e-12);
        n.aux0[static_cast<std::size_t>(i)] = nrm;
        for (int j = 0; j < vx.cols(); ++j) n.value.at(i, j) = vx.at(i, j) / nrm;
    }
    return push(std::move(n));
}

VarId Tape::scale_rows(VarId x, Tensor row_mask) {
    const Tensor& vx = value(x);
    require(row_mask.numel() == static_cast<std::size_t>(vx.rows()),
            "Tape::scale_rows: mask length must match rows");
    Node n;
    n.op = Op::scale_rows;
    n.in = {x, -1, -1};
    n.cmask = std::move(row_mask);
    n.value = vx;
    for (int i = 0; i < vx.rows(); ++i) {
        const double m = n.cmask[static_cast<std::size_t>(i)];
        for (int j = 0; j < vx.cols(); ++j) n.value.at(i, j) *= m;
    }
    return push(std::move(n));
}

VarId Tape::add_chan_bias(VarId x, VarId bias) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(bias);
    require(vb.numel() == static_cast<std::size_t>(vx.channels()),
            "Tape::add_chan_bias: bias length must match channels");
    Node n;
    n.op = Op::add_chan_bias;
    n.in = {x, bias, -1};
    n.value = vx;
    for (int c = 0; c < vx.channels(); ++c) {
        const double b = vb[static_cast<std::size_t>(c)];
        for (int y = 0; y < vx.height(); ++y)
            for (int xx = 0; xx < vx.width(); ++xx) n.value.at(c, y, xx) += b;
    }
    return push(std::move(n));
}

VarId Tape::sum_mul(VarId a, VarId b) {
    value(a).check_same_shape(value(b), "Tape::sum_mul");
    Node n;
    n.op = Op::sum_mul;
    n.in = {a, b, -1};
    double s = 0.0;
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < va.numel(); ++i) s += va[i] * vb[i];
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

VarId Tape::abs_val(VarId x) {
    require(value(x).numel() == 1, "Tape::abs_val: expects a scalar");
    Node n;
    n.op = Op::abs_val;
    n.in = {x, -1, -1};
    n.value = Tensor::scalar(std::fabs(value(x)[0]));
    return push(std::move(n));
}

VarId Tape::mul(VarId a, VarId b) {
    value(a).check_same_shape(value(b), "Tape::mul");
    Node n;
    n.op = Op::mul;
    n.in = {a, b, -1};
    n.value = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value[i] *= vb[i];
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

VarId Tape::linear(VarId x, VarId w, VarId bias) {
    VarId y = matmul(x, w);
    return bias >= 0 ? add_row(y, bias) : y;
}

VarId Tape::attention(VarId q, VarId k, VarId v) {
    const int d = value(q).cols();
    VarId scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    return matmul(softmax_rows(scores), v);
}

VarId Tape::mse(VarId a, VarId b) {
    VarId d = sub(a, b);
    return scale(sum_mul(d, d), 1.0 / static_cast<double>(value(a).numel()));
}

VarId Tape::cosine(VarId a, VarId b) {
    require(value(a).ndim() == 2 && value(a).rows() == 1 && value(b).ndim() == 2 &&
                value(b).rows() == 1,
            "Tape::cosine: expects [1,d] row vectors");
    return sum_mul(normalize_rows(a), normalize_rows(b));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::backward(VarId loss) {
    require(value(loss).numel() == 1, "Tape::backward: loss must be scalar");
    grad_buf(loss)[0] = 1.0;

    for (int vi = static_cast<int>(nodes_.size()) - 1; vi >= 0; --vi) {
        Node& n = nodes_[static_cast<std::size_t>(vi)];
        if (n.grad.empty()) continue;  // no gradient flowed here
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::input:
            case Op::param:
                break;
            case Op::matmul: {
                // C = A B: dA += dC B^T, dB += A^T dC
                kern::matmul_nt(grad_buf(n.in[0]), g, value(n.in[1]), true);
                kern::matmul_tn(grad_buf(n.in[1]), value(n.in[0]), g, true);
                break;
            }
            case Op::matmul_nt: {
                // C = A B^T: dA += dC B, dB += dC^T A
                kern::matmul(grad_buf(n.in[0]), g, value(n.in[1]), true);
                kern::matmul_tn(grad_buf(n.in[1]), g, value(n.in[0]), true);
                break;
            }
            case Op::add: {
                grad_buf(n.in[0]).add_inplace(g);
                grad_buf(n.in[1]).add_inplace(g);
                break;
            }
            case Op::sub: {
                grad_buf(n.in[0]).add_inplace(g);
                Tensor& gb = grad_buf(n.in[1]);
                for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= g[i];
                break;
            }
            case Op::scale: {
                Tensor& gx = grad_buf(n.in[0]);
                for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += n.a0 * g[i];
                break;
            }
            case Op::add_row: {
                grad_buf(n.in[0]).add_inplace(g);
                Tensor& gr = grad_buf(n.in[1]);
                for (int j = 0; j < g.cols(); ++j) {
                    double s = 0.0;
                    for (int i = 0; i < g.rows(); ++i) s += g.at(i, j);
                    gr[static_cast<std::size_t>(j)] += s;
                }
                break;
            }
            case Op::conv2d: {
                kern::conv2d_bwd_input(grad_buf(n.in[0]), g, value(n.in[1]), n.i0, true);
                Tensor no_bias;
                Tensor& db = n.in[2] >= 0 ? grad_buf(n.in[2]) : no_bias;
                kern::conv2d_bwd_weight(grad_buf(n.in[1]), db, g, value(n.in[0]), n.i0, true);
                break;
            }
            case Op::silu: {
                kern::silu_bwd(grad_buf(n.in[0]), g, value(n.in[0]), true);
                break;
            }
            case Op::groupnorm: {
                kern::groupnorm_bwd(grad_buf(n.in[0]), grad_buf(n.in[1]), grad_buf(n.in[2]), g,
                                    value(n.in[0]), value(n.in[1]), n.i0, n.aux0, n.aux1, true);
                break;
            }
            case Op::layernorm: {
                kern::layernorm_rows_bwd(grad_buf(n.in[0]), grad_buf(n.in[1]), grad_buf(n.in[2]),
                                         g, value(n.in[0]), value(n.in[1]), n.aux0, n.aux1, true);
                break;
            }
            case Op::softmax: {
                kern::softmax_rows_bwd(grad_buf(n.in[0]), g, n.value, true);
                break;
            }
            case Op::chw2rows: {
                kern::chw_to_rows_bwd(grad_buf(n.in[0]), g, true);
                break;
            }
            case Op::rows2chw: {
                Tensor& gx = grad_buf(n.in[0]);
                for (int c = 0; c < g.channels(); ++c)
                    for (int y = 0; y < n.i0; ++y)
                        for (int xx = 0; xx < n.i1; ++xx) gx.at(y * n.i1 + xx, c) += g.at(c, y, xx);
                break;
            }
            case Op::upsample2x: {
                kern::upsample2x_bwd(grad_buf(n.in[0]), g, true);
                break;
            }
            case Op::concat_rows: {
                Tensor& ga = grad_buf(n.in[0]);
                Tensor& gb = grad_buf(n.in[1]);
                for (int i = 0; i < ga.rows(); ++i)
                    for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
                for (int i = 0; i < gb.rows(); ++i)
                    for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(ga.rows() + i, j);
                break;
            }
            case Op::slice_rows: {
                Tensor& gx = grad_buf(n.in[0]);
                for (int i = 0; i < n.i1; ++i)
                    for (int j = 0; j < g.cols(); ++j) gx.at(n.i0 + i, j) += g.at(i, j);
                break;
            }
            case Op::mean_rows: {
                Tensor& gx = grad_buf(n.in[0]);
                const double inv = 1.0 / gx.rows();
                for (int i = 0; i < gx.rows(); ++i)
                    for (int j = 0; j < gx.cols(); ++j) gx.at(i, j) += inv * g.at(0, j);
                break;
            }
            case Op::normalize_rows: {
                // y = x / n with n = sqrt(sum x^2 + eps):
                // dx = (dy - y * (dy . y)) / n
                Tensor& gx = grad_buf(n.in[0]);
                for (int i = 0; i < gx.rows(); ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < gx.cols(); ++j) dot += g.at(i, j) * n.value.at(i, j);
                    const double inv = 1.0 / n.aux0[static_cast<std::size_t>(i)];
                    for (int j = 0; j < gx.cols(); ++j)
                        gx.at(i, j) += (g.at(i, j) - n.value.at(i, j) * dot) * inv;
                }
                break;
            }
            case Op::scale_rows: {
                Tensor& gx = grad_buf(n.in[0]);
                for (int i = 0; i < gx.rows(); ++i) {
                    const double m = n.cmask[static_cast<std::size_t>(i)];
                    for (int j = 0; j < gx.cols(); ++j) gx.at(i, j) += m * g.at(i, j);
                }
                break;
            }
            case Op::add_chan_bias: {
                grad_buf(n.in[0]).add_inplace(g);
                Tensor& gb = grad_buf(n.in[1]);
                for (int c = 0; c < g.channels(); ++c) {
                    double s = 0.0;
                    for (int y = 0; y < g.height(); ++y)
                        for (int xx = 0; xx < g.width(); ++xx) s += g.at(c, y, xx);
                    gb[static_cast<std::size_t>(c)] += s;
                }
                break;
            }
            case Op::sum_mul: {
                const double gs = g[0];
                Tensor& ga = grad_buf(n.in[0]);
                Tensor& gb = grad_buf(n.in[1]);
                const Tensor& va = value(n.in[0]);
                const Tensor& vb = value(n.in[1]);
                for (std::size_t i = 0; i < ga.numel(); ++i) {
                    ga[i] += gs * vb[i];
                    gb[i] += gs * va[i];
                }
                break;
            }
            case Op::abs_val: {
                const double x = value(n.in[0])[0];
                const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                grad_buf(n.in[0])[0] += sign * g[0];
                break;
            }
            case Op::mul: {
                Tensor& ga = grad_buf(n.in[0]);
                Tensor& gb = grad_buf(n.in[1]);
                const Tensor& va = value(n.in[0]);
                const Tensor& vb = value(n.in[1]);
                for (std::size_t i = 0; i < ga.numel(); ++i) {
                    ga[i] += g[i] * vb[i];
                    gb[i] += g[i] * va[i];
                }
                break;
            }
        }
    }
}

void Tape::add_param_grads(std::vector<Tensor>& grads) const {
    for (const Node& n : nodes_) {
        if (n.op != Op::param || n.param_index < 0 || n.grad.empty()) continue;
        grads[static_cast<std::size_t>(n.param_index)].add_inplace(n.grad);
    }
}

}  // namespace disen::ad
