#include "disen/cod.hpp"

#include <cmath>
#include <stdexcept>

namespace disen {

namespace {

void require_unit(const Tensor& v, const char* name) {
    double sq = 0.0;
    for (std::size_t i = 0; i < v.numel(); ++i) sq += v[i] * v[i];
    if (std::fabs(std::sqrt(sq) - 1.0) > 1e-3)
        throw std::invalid_argument(std::string("cod: ") + name +
                                    " must be a unit vector (pooled representation)");
}

double dot(const Tensor& a, const Tensor& b) {
    a.check_same_shape(b, "cod dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

void require_unit_inputs(const Tensor& f_cpt, const Tensor& f_a, const Tensor& f_tar) {
    require_unit(f_cpt, "f_cpt");
    require_unit(f_a, "f_a");
    require_unit(f_tar, "f_tar");
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("loss weights: lambda must be finite and >= 0");
}

double cod_loss(const Tensor& f_cpt, const Tensor& f_a, const Tensor& f_tar) {
    require_unit_inputs(f_cpt, f_a, f_tar);
    return std::fabs(dot(f_a, f_tar)) - dot(f_cpt, f_tar);
}

double cd_loss(const Tensor& f_cpt, const Tensor& f_a, const Tensor& f_tar) {
    require_unit_inputs(f_cpt, f_a, f_tar);
    return dot(f_a, f_tar) - dot(f_cpt, f_tar);
}

ad::VarId cod_loss(ad::Tape& tape, ad::VarId f_cpt, ad::VarId f_a, ad::VarId f_tar) {
    require_unit_inputs(tape.value(f_cpt), tape.value(f_a), tape.value(f_tar));
    return tape.sub(tape.abs_val(tape.sum_mul(f_a, f_tar)), tape.sum_mul(f_cpt, f_tar));
}

ad::VarId cd_loss(ad::Tape& tape, ad::VarId f_cpt, ad::VarId f_a, ad::VarId f_tar) {
    require_unit_inputs(tape.value(f_cpt), tape.value(f_a), tape.value(f_tar));
    return tape.sub(tape.sum_mul(f_a, f_tar), tape.sum_mul(f_cpt, f_tar));
}

double total_loss(double ldm, double contrastive, const LossWeights& weights) {
    weights.validate();
    if (weights.variant == ContrastiveVariant::None) return ldm;
    return ldm + weights.lambda * contrastive;
}

ad::VarId total_loss(ad::Tape& tape, ad::VarId ldm, ad::VarId contrastive,
                     const LossWeights& weights) {
    weights.validate();
    if (weights.variant == ContrastiveVariant::None) return ldm;
    return tape.add(ldm, tape.scale(contrastive, weights.lambda));
}

}  // namespace disen
