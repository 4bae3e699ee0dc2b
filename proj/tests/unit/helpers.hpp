#pragma once

#include <cmath>

#include "disen/rng.hpp"
#include "disen/tensor.hpp"

namespace testutil {

inline disen::Tensor random_tensor(std::vector<int> shape, disen::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
    disen::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline disen::Tensor random_unit(disen::Rng& rng, int dim) {
    disen::Tensor t({dim});
    double norm = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t[i] = rng.normal();
        norm += t[i] * t[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] /= norm;
    return t;
}

inline double max_abs_diff(const disen::Tensor& a, const disen::Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline bool bit_equal(const disen::Tensor& a, const disen::Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace testutil
