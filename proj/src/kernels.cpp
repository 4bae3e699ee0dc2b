#include "disen/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace disen::kern {

namespace {

void check2d(const Tensor& t, const char* name) {
    if (t.ndim() != 2) throw std::invalid_argument(std::string(name) + ": expected rank-2 tensor");
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

void matmul(Tensor& c, const Tensor& a, const Tensor& b, bool acc) {
    check2d(a, "matmul A"); check2d(b, "matmul B");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
    if (c.ndim() != 2 || c.rows() != m || c.cols() != n)
        throw std::invalid_argument("matmul: bad output shape " + c.shape_str());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * n;
        if (!acc) std::fill(crow, crow + n, 0.0);
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(Tensor& c, const Tensor& a, const Tensor& b, bool acc) {
    check2d(a, "matmul_nt A"); check2d(b, "matmul_nt B");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) throw std::invalid_argument("matmul_nt: inner dims " + a.shape_str() + " vs " + b.shape_str());
    if (c.ndim() != 2 || c.rows() != m || c.cols() != n)
        throw std::invalid_argument("matmul_nt: bad output shape " + c.shape_str());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = acc ? crow[j] + s : s;
        }
    }
}

void matmul_tn(Tensor& c, const Tensor& a, const Tensor& b, bool acc) {
    check2d(a, "matmul_tn A"); check2d(b, "matmul_tn B");
    const int m = a.rows(), k1 = a.cols(), k2 = b.cols();
    if (b.rows() != m) throw std::invalid_argument("matmul_tn: inner dims " + a.shape_str() + " vs " + b.shape_str());
    if (c.ndim() != 2 || c.rows() != k1 || c.cols() != k2)
        throw std::invalid_argument("matmul_tn: bad output shape " + c.shape_str());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < k1; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * k2;
        if (!acc) std::fill(crow, crow + k2, 0.0);
        for (int mm = 0; mm < m; ++mm) {
            const double av = pa[static_cast<std::size_t>(mm) * k1 + i];
            const double* brow = pb + static_cast<std::size_t>(mm) * k2;
            for (int j = 0; j < k2; ++j) crow[j] += av * brow[j];
        }
    }
}

void conv2d_fwd(Tensor& out, const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    const int ci = x.channels(), h = x.height(), wdt = x.width();
    if (w.ndim() != 4) throw std::invalid_argument("conv2d: weight must be rank 4");
    const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != ci) throw std::invalid_argument("conv2d: channel mismatch");
    if (kh != kw || kh % 2 == 0) throw std::invalid_argument("conv2d: kernel must be odd square");
    const int pad = kh / 2;
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wdt + 2 * pad - kw) / stride + 1;
    if (out.ndim() != 3 || out.channels() != co || out.height() != oh || out.width() != ow)
        throw std::invalid_argument("conv2d: bad output shape " + out.shape_str());
    const bool has_bias = !b.empty();
    const double* px = x.data();
    const double* pw = w.data();
    double* po = out.data();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        double* omap = po + static_cast<std::size_t>(oc) * oh * ow;
        const double bias = has_bias ? b[static_cast<std::size_t>(oc)] : 0.0;
        std::fill(omap, omap + static_cast<std::size_t>(oh) * ow, bias);
        for (int ic = 0; ic < ci; ++ic) {
            const double* imap = px + static_cast<std::size_t>(ic) * h * wdt;
            const double* wk = pw + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wk[ky * kw + kx];
                    if (wv == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const double* irow = imap + static_cast<std::size_t>(iy) * wdt;
                        double* orow = omap + static_cast<std::size_t>(oy) * ow;
                        if (stride == 1) {
                            const int x0 = std::max(0, pad - kx);
                            const int x1 = std::min(ow, wdt + pad - kx);
                            const int off = kx - pad;
                            for (int ox = x0; ox < x1; ++ox) orow[ox] += wv * irow[ox + off];
                        } else {
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= wdt) continue;
                                orow[ox] += wv * irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_bwd_input(Tensor& dx, const Tensor& dout, const Tensor& w, int stride, bool acc) {
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int pad = kh / 2;
    const int oh = dout.height(), ow = dout.width();
    const int h = dx.height(), wdt = dx.width();
    if (dout.channels() != co || dx.channels() != ci)
        throw std::invalid_argument("conv2d_bwd_input: channel mismatch");
    const double* pd = dout.data();
    const double* pw = w.data();
    double* px = dx.data();
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < ci; ++ic) {
        double* dmap = px + static_cast<std::size_t>(ic) * h * wdt;
        if (!acc) std::fill(dmap, dmap + static_cast<std::size_t>(h) * wdt, 0.0);
        for (int oc = 0; oc < co; ++oc) {
            const double* gmap = pd + static_cast<std::size_t>(oc) * oh * ow;
            const double* wk = pw + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wk[ky * kw + kx];
                    if (wv == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const double* grow = gmap + static_cast<std::size_t>(oy) * ow;
                        double* drow = dmap + static_cast<std::size_t>(iy) * wdt;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= wdt) continue;
                            drow[ix] += wv * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_bwd_weight(Tensor& dw, Tensor& db, const Tensor& dout, const Tensor& x, int stride,
                       bool acc) {
    const int co = dw.dim(0), ci = dw.dim(1), kh = dw.dim(2), kw = dw.dim(3);
    const int pad = kh / 2;
    const int oh = dout.height(), ow = dout.width();
    const int h = x.height(), wdt = x.width();
    const bool has_bias = !db.empty();
    const double* pd = dout.data();
    const double* px = x.data();
    double* pw = dw.data();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        const double* gmap = pd + static_cast<std::size_t>(oc) * oh * ow;
        if (has_bias) {
            double s = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) s += gmap[i];
            db[static_cast<std::size_t>(oc)] = acc ? db[static_cast<std::size_t>(oc)] + s : s;
        }
        for (int ic = 0; ic < ci; ++ic) {
            const double* imap = px + static_cast<std::size_t>(ic) * h * wdt;
            double* wk = pw + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    double s = 0.0;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const double* grow = gmap + static_cast<std::size_t>(oy) * ow;
                        const double* irow = imap + static_cast<std::size_t>(iy) * wdt;
                        if (stride == 1) {
                            const int x0 = std::max(0, pad - kx);
                            const int x1 = std::min(ow, wdt + pad - kx);
                            const int off = kx - pad;
                            for (int ox = x0; ox < x1; ++ox) s += grow[ox] * irow[ox + off];
                        } else {
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= wdt) continue;
                                s += grow[ox] * irow[ix];
                            }
                        }
                    }
                    wk[ky * kw + kx] = acc ? wk[ky * kw + kx] + s : s;
                }
            }
        }
    }
}

void upsample2x_fwd(Tensor& out, const Tensor& x) {
    const int c = x.channels(), h = x.height(), w = x.width();
    if (out.channels() != c || out.height() != 2 * h || out.width() != 2 * w)
        throw std::invalid_argument("upsample2x: bad output shape");
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < c; ++ic) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const double v = x.at(ic, y, xx);
                out.at(ic, 2 * y, 2 * xx) = v;
                out.at(ic, 2 * y, 2 * xx + 1) = v;
                out.at(ic, 2 * y + 1, 2 * xx) = v;
                out.at(ic, 2 * y + 1, 2 * xx + 1) = v;
            }
        }
    }
}

void upsample2x_bwd(Tensor& dx, const Tensor& dout, bool acc) {
    const int c = dx.channels(), h = dx.height(), w = dx.width();
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < c; ++ic) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const double s = dout.at(ic, 2 * y, 2 * xx) + dout.at(ic, 2 * y, 2 * xx + 1) +
                                 dout.at(ic, 2 * y + 1, 2 * xx) + dout.at(ic, 2 * y + 1, 2 * xx + 1);
                if (acc) dx.at(ic, y, xx) += s; else dx.at(ic, y, xx) = s;
            }
        }
    }
}

void silu_fwd(Tensor& out, const Tensor& x) {
    out.check_same_shape(x, "silu");
    const std::size_t n = x.numel();
    const double* px = x.data();
    double* po = out.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        po[i] = px[i] * sigmoid(px[i]);
}

void silu_bwd(Tensor& dx, const Tensor& dout, const Tensor& x, bool acc) {
    const std::size_t n = x.numel();
    const double* px = x.data();
    const double* pd = dout.data();
    double* pg = dx.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double s = sigmoid(px[i]);
        const double g = pd[i] * (s + px[i] * s * (1.0 - s));
        pg[i] = acc ? pg[i] + g : g;
    }
}

void softmax_rows_fwd(Tensor& out, const Tensor& x) {
    check2d(x, "softmax");
    const int m = x.rows(), n = x.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* xr = x.data() + static_cast<std::size_t>(i) * n;
        double* yr = out.data() + static_cast<std::size_t>(i) * n;
        double mx = xr[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) { yr[j] = std::exp(xr[j] - mx); z += yr[j]; }
        const double inv = 1.0 / z;
        for (int j = 0; j < n; ++j) yr[j] *= inv;
    }
}

void softmax_rows_bwd(Tensor& dx, const Tensor& dout, const Tensor& y, bool acc) {
    const int m = y.rows(), n = y.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* yr = y.data() + static_cast<std::size_t>(i) * n;
        const double* dr = dout.data() + static_cast<std::size_t>(i) * n;
        double* gr = dx.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dr[j] * yr[j];
        for (int j = 0; j < n; ++j) {
            const double g = yr[j] * (dr[j] - dot);
            gr[j] = acc ? gr[j] + g : g;
        }
    }
}

void layernorm_rows_fwd(Tensor& out, Tensor& mean, Tensor& rstd, const Tensor& x,
                        const Tensor& gamma, const Tensor& beta, double eps) {
    check2d(x, "layernorm");
    const int m = x.rows(), n = x.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* xr = x.data() + static_cast<std::size_t>(i) * n;
        double* yr = out.data() + static_cast<std::size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += xr[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) { const double d = xr[j] - mu; var += d * d; }
        var /= n;
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[static_cast<std::size_t>(i)] = mu;
        rstd[static_cast<std::size_t>(i)] = rs;
        for (int j = 0; j < n; ++j)
            yr[j] = (xr[j] - mu) * rs * gamma[static_cast<std::size_t>(j)] + beta[static_cast<std::size_t>(j)];
    }
}

void layernorm_rows_bwd(Tensor& dx, Tensor& dgamma, Tensor& dbeta, const Tensor& dout,
                        const Tensor& x, const Tensor& gamma, const Tensor& mean,
                        const Tensor& rstd, bool acc) {
    const int m = x.rows(), n = x.cols();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* xr = x.data() + static_cast<std::size_t>(i) * n;
        const double* dr = dout.data() + static_cast<std::size_t>(i) * n;
        double* gr = dx.data() + static_cast<std::size_t>(i) * n;
        const double mu = mean[static_cast<std::size_t>(i)];
        const double rs = rstd[static_cast<std::size_t>(i)];
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double xh = (xr[j] - mu) * rs;
            const double dy = dr[j] * gamma[static_cast<std::size_t>(j)];
            s1 += dy;
            s2 += dy * xh;
        }
        s1 /= n;
        s2 /= n;
        for (int j = 0; j < n; ++j) {
            const double xh = (xr[j] - mu) * rs;
            const double dy = dr[j] * gamma[static_cast<std::size_t>(j)];
            const double g = rs * (dy - s1 - xh * s2);
            gr[j] = acc ? gr[j] + g : g;
        }
    }
    // gamma/beta gradients: partitioned over columns so each thread owns a column.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        double dg = 0.0, dbv = 0.0;
        for (int i = 0; i < m; ++i) {
            const double xh = (x.at(i, j) - mean[static_cast<std::size_t>(i)]) * rstd[static_cast<std::size_t>(i)];
            dg += dout.at(i, j) * xh;
            dbv += dout.at(i, j);
        }
        if (acc) { dgamma[static_cast<std::size_t>(j)] += dg; dbeta[static_cast<std::size_t>(j)] += dbv; }
        else { dgamma[static_cast<std::size_t>(j)] = dg; dbeta[static_cast<std::size_t>(j)] = dbv; }
    }
}

void groupnorm_fwd(Tensor& out, Tensor& mean, Tensor& rstd, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, int groups, double eps) {
    const int c = x.channels(), h = x.height(), w = x.width();
    if (c % groups != 0) throw std::invalid_argument("groupnorm: channels not divisible by groups");
    const int cg = c / groups;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t gsize = static_cast<std::size_t>(cg) * plane;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        const double* xg = x.data() + static_cast<std::size_t>(g) * gsize;
        double mu = 0.0;
        for (std::size_t i = 0; i < gsize; ++i) mu += xg[i];
        mu /= static_cast<double>(gsize);
        double var = 0.0;
        for (std::size_t i = 0; i < gsize; ++i) { const double d = xg[i] - mu; var += d * d; }
        var /= static_cast<double>(gsize);
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[static_cast<std::size_t>(g)] = mu;
        rstd[static_cast<std::size_t>(g)] = rs;
        double* yg = out.data() + static_cast<std::size_t>(g) * gsize;
        for (int cc = 0; cc < cg; ++cc) {
            const int ch = g * cg + cc;
            const double ga = gamma[static_cast<std::size_t>(ch)];
            const double be = beta[static_cast<std::size_t>(ch)];
            const double* xp = xg + static_cast<std::size_t>(cc) * plane;
            double* yp = yg + static_cast<std::size_t>(cc) * plane;
            for (std::size_t i = 0; i < plane; ++i) yp[i] = (xp[i] - mu) * rs * ga + be;
        }
    }
}

void groupnorm_bwd(Tensor& dx, Tensor& dgamma, Tensor& dbeta, const Tensor& dout, const Tensor& x,
                   const Tensor& gamma, int groups, const Tensor& mean, const Tensor& rstd,
                   bool acc) {
    const int c = x.channels(), h = x.height(), w = x.width();
    const int cg = c / groups;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t gsize = static_cast<std::size_t>(cg) * plane;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        const double* xg = x.data() + static_cast<std::size_t>(g) * gsize;
        const double* dg = dout.data() + static_cast<std::size_t>(g) * gsize;
        double* gx = dx.data() + static_cast<std::size_t>(g) * gsize;
        const double mu = mean[static_cast<std::size_t>(g)];
        const double rs = rstd[static_cast<std::size_t>(g)];
        double s1 = 0.0, s2 = 0.0;
        for (int cc = 0; cc < cg; ++cc) {
            const double ga = gamma[static_cast<std::size_t>(g * cg + cc)];
            const double* xp = xg + static_cast<std::size_t>(cc) * plane;
            const double* dp = dg + static_cast<std::size_t>(cc) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double dy = dp[i] * ga;
                s1 += dy;
                s2 += dy * (xp[i] - mu) * rs;
            }
        }
        const double inv_m = 1.0 / static_cast<double>(gsize);
        s1 *= inv_m;
        s2 *= inv_m;
        for (int cc = 0; cc < cg; ++cc) {
            const int ch = g * cg + cc;
            const double ga = gamma[static_cast<std::size_t>(ch)];
            const double* xp = xg + static_cast<std::size_t>(cc) * plane;
            const double* dp = dg + static_cast<std::size_t>(cc) * plane;
            double* gp = gx + static_cast<std::size_t>(cc) * plane;
            double dgam = 0.0, dbet = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (xp[i] - mu) * rs;
                const double dy = dp[i] * ga;
                const double gv = rs * (dy - s1 - xh * s2);
                gp[i] = acc ? gp[i] + gv : gv;
                dgam += dp[i] * xh;
                dbet += dp[i];
            }
            if (acc) { dgamma[static_cast<std::size_t>(ch)] += dgam; dbeta[static_cast<std::size_t>(ch)] += dbet; }
            else { dgamma[static_cast<std::size_t>(ch)] = dgam; dbeta[static_cast<std::size_t>(ch)] = dbet; }
        }
    }
}

void chw_to_rows_fwd(Tensor& out, const Tensor& x) {
    const int c = x.channels(), h = x.height(), w = x.width();
    if (out.rows() != h * w || out.cols() != c)
        throw std::invalid_argument("chw_to_rows: bad output shape");
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(y * w + xx, ic) = x.at(ic, y, xx);
}

void chw_to_rows_bwd(Tensor& dx, const Tensor& dout, bool acc) {
    const int c = dx.channels(), h = dx.height(), w = dx.width();
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const double v = dout.at(y * w + xx, ic);
                if (acc) dx.at(ic, y, xx) += v; else dx.at(ic, y, xx) = v;
            }
}

}  // namespace disen::kern
