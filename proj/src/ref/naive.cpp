#include "naive.hpp"

#include <cmath>

namespace disen::ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(j, k);
            c.at(i, j) = s;
        }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    Tensor c({a.cols(), b.cols()});
    for (int i = 0; i < a.cols(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int m = 0; m < a.rows(); ++m) s += a.at(m, i) * b.at(m, j);
            c.at(i, j) = s;
        }
    return c;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    const int ci = x.channels(), h = x.height(), wd = x.width();
    const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int pad = kh / 2;
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({co, oh, ow});
    for (int oc = 0; oc < co; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            s += w.at4(oc, ic, ky, kx) * x.at(ic, iy, ix);
                        }
                out.at(oc, oy, ox) = s;
            }
    return out;
}

Tensor upsample2x(const Tensor& x) {
    Tensor out({x.channels(), 2 * x.height(), 2 * x.width()});
    for (int c = 0; c < x.channels(); ++c)
        for (int y = 0; y < out.height(); ++y)
            for (int xx = 0; xx < out.width(); ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
    return out;
}

Tensor silu(const Tensor& x) {
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] / (1.0 + std::exp(-x[i]));
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    Tensor out = Tensor::zeros_like(x);
    for (int i = 0; i < x.rows(); ++i) {
        double mx = x.at(i, 0);
        for (int j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (int j = 0; j < x.cols(); ++j) z += std::exp(x.at(i, j) - mx);
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = std::exp(x.at(i, j) - mx) / z;
    }
    return out;
}

Tensor layernorm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    Tensor out = Tensor::zeros_like(x);
    const int n = x.cols();
    for (int i = 0; i < x.rows(); ++i) {
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += x.at(i, j);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (x.at(i, j) - mu) * (x.at(i, j) - mu);
        var /= n;
        for (int j = 0; j < n; ++j)
            out.at(i, j) = (x.at(i, j) - mu) / std::sqrt(var + eps) * gamma[static_cast<std::size_t>(j)] +
                           beta[static_cast<std::size_t>(j)];
    }
    return out;
}

Tensor groupnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps) {
    const int c = x.channels(), h = x.height(), w = x.width();
    const int cg = c / groups;
    Tensor out = Tensor::zeros_like(x);
    for (int g = 0; g < groups; ++g) {
        double mu = 0.0;
        int cnt = 0;
        for (int cc = g * cg; cc < (g + 1) * cg; ++cc)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) { mu += x.at(cc, y, xx); ++cnt; }
        mu /= cnt;
        double var = 0.0;
        for (int cc = g * cg; cc < (g + 1) * cg; ++cc)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) var += (x.at(cc, y, xx) - mu) * (x.at(cc, y, xx) - mu);
        var /= cnt;
        for (int cc = g * cg; cc < (g + 1) * cg; ++cc)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    out.at(cc, y, xx) = (x.at(cc, y, xx) - mu) / std::sqrt(var + eps) *
                                            gamma[static_cast<std::size_t>(cc)] +
                                        beta[static_cast<std::size_t>(cc)];
    }
    return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    const int m = q.rows(), d = q.cols(), n = k.rows(), dv = v.cols();
    Tensor scores({m, n});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int kk = 0; kk < d; ++kk) s += q.at(i, kk) * k.at(j, kk);
            scores.at(i, j) = s * scale;
        }
    Tensor a = softmax_rows(scores);
    Tensor out({m, dv});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < dv; ++j) {
            double s = 0.0;
            for (int kk = 0; kk < n; ++kk) s += a.at(i, kk) * v.at(kk, j);
            out.at(i, j) = s;
        }
    return out;
}

}  // namespace disen::ref
