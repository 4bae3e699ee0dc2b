#pragma once

// Contrastive Orthogonal Disentangled loss (Eq. 6), the non-orthogonal CD
// ablation (Eq. 8), and the total objective (Eq. 7). All cosines act on the
// designated pooled unit vectors; cos of unit vectors is the plain dot
// product. |.|'s subgradient at 0 is 0.

#include "disen/autograd.hpp"
#include "disen/tensor.hpp"

namespace disen {

enum class ContrastiveVariant { COD, CD, None };

struct LossWeights {
    double lambda = 1e-4;
    ContrastiveVariant variant = ContrastiveVariant::COD;

    void validate() const;  // lambda >= 0 and finite
};

// |cos(f_a, f_tar)| - cos(f_cpt, f_tar). Inputs must be unit vectors
// (norm within 1e-3 of 1), else std::invalid_argument.
double cod_loss(const Tensor& f_cpt, const Tensor& f_a, const Tensor& f_tar);
ad::VarId cod_loss(ad::Tape& tape, ad::VarId f_cpt, ad::VarId f_a, ad::VarId f_tar);

// cos(f_a, f_tar) - cos(f_cpt, f_tar) (Eq. 8, no absolute value).
double cd_loss(const Tensor& f_cpt, const Tensor& f_a, const Tensor& f_tar);
ad::VarId cd_loss(ad::Tape& tape, ad::VarId f_cpt, ad::VarId f_a, ad::VarId f_tar);

// ldm + lambda * contrastive; the contrastive term is dropped under None.
double total_loss(double ldm, double contrastive, const LossWeights& weights);
ad::VarId total_loss(ad::Tape& tape, ad::VarId ldm, ad::VarId contrastive,
                     const LossWeights& weights);

}  // namespace disen
