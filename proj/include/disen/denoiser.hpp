#pragma once

// Conditional noise-prediction network eps_theta: a small pixel-space
// encoder-bottleneck-decoder with 4 dual cross-attention blocks (Eq. 4).
// Each attention block attends a flattened feature map over the prompt tokens
// (original path W_k/W_v) and the per-block concept tokens (adapter path
// W'_k/W'_v), sharing the query projection W_q. Structure around Eq. 4 is
// pre-attention layernorm + residual add.

#include <vector>

#include "disen/autograd.hpp"
#include "disen/model.hpp"
#include "disen/rng.hpp"

namespace disen {

struct DenoiserParams {
    struct ResBlock {
        ad::Param gn1_g, gn1_b;
        ad::Param conv1_w, conv1_b;  // 3x3, C -> C
        ad::Param time_w, time_b;    // [time_hidden, C]
        ad::Param gn2_g, gn2_b;
        ad::Param conv2_w, conv2_b;  // 3x3, C -> C, zero-init
        int channels = 0;
    };
    struct AttnBlock {
        ad::Param ln_g, ln_b;  // over channel dim of the flattened rows
        ad::Param wq;          // [C, d_attn], shared by both paths (Eq. 4)
        ad::Param wk_txt;      // [d_txt, d_attn]
        ad::Param wv_txt;      // [d_txt, C], zero-init
        ad::Param wk_cpt;      // [d_u, d_attn]   adapter W'_k
        ad::Param wv_cpt;      // [d_u, C], zero-init   adapter W'_v
        int channels = 0;
    };

    ad::Param time_w1, time_b1;  // sinusoidal features -> time_hidden

    ad::Param stem_w, stem_b;    // 3 -> c0 @ res
    ResBlock enc1;               // c0 @ res
    ad::Param down1_w, down1_b;  // c0 -> c1, stride 2
    ResBlock enc2;               // c1 @ res/2
    ad::Param down2_w, down2_b;  // c1 -> c2, stride 2
    ResBlock mid1, mid2;         // c2 @ res/4
    ad::Param up1_w, up1_b;      // c2 -> c1 after upsample, @ res/2
    ResBlock dec2;               // c1 @ res/2
    ad::Param up2_w, up2_b;      // c1 -> c0 after upsample, @ res
    ResBlock dec1;               // c0 @ res
    ad::Param out_gn_g, out_gn_b;
    ad::Param out_w, out_b;      // c0 -> 3, zero-init

    // Adapter blocks in forward order: encoder @res, bottleneck @res/4,
    // decoder @res/2, decoder @res. Exactly N = 4.
    std::vector<AttnBlock> attn;

    DenoiserParams(const ModelConfig& cfg, Rng& init);
    void register_params(ad::ParamRegistry& reg);
    // Registry ids of the adapter projections W'_k / W'_v (the lr_b group).
    std::vector<int> adapter_param_ids() const;
};

// One concept's conditioning for one attention block: tokens plus an optional
// {0,1} row mask restricting where the adapter writes (empty = everywhere).
struct BlockConcept {
    ad::VarId tokens = -1;  // [n_tokens, d_u]
    Tensor row_mask;        // [rows] or empty
};

// Eq. 4: rows + Attn(LN(rows) Wq, c_t Wk, c_t Wv)
//             + sum_k mask_k . mu * Attn(LN(rows) Wq, f_k W'k, f_k W'v).
// `attn_rows`, when non-null, receives the post-softmax weights (text path
// first, then one per concept).
ad::VarId dual_cross_attention(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                               const std::vector<BlockConcept>& concepts, double mu,
                               const DenoiserParams::AttnBlock& block,
                               std::vector<Tensor>* attn_rows = nullptr);

// Single unmasked concept (the common case).
ad::VarId dual_cross_attention(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                               ad::VarId concept_tokens, double mu,
                               const DenoiserParams::AttnBlock& block);

// Per-forward concept conditioning: per-block token matrices plus an optional
// image-resolution {0,1} mask, nearest-resampled to each block's grid.
struct ConceptStream {
    std::vector<ad::VarId> blocks;  // N entries
    Tensor mask;                    // [res, res] or empty
};

// A zero ConceptRep on the tape (the null concept condition).
ConceptStream zero_concept_stream(ad::Tape& tape, const ModelConfig& cfg);

// Full trunk forward. t in 1..T; prompt_tokens is [L_p, d_txt].
ad::VarId predict_noise(ad::Tape& tape, ad::VarId z_t, int t, int T, ad::VarId prompt_tokens,
                        const std::vector<ConceptStream>& concepts, double mu,
                        const DenoiserParams& params, const ModelConfig& cfg);

// Sinusoidal timestep features, [1, time_dim].
Tensor timestep_features(int t, int time_dim);

// Nearest resample of a {0,1} [res, res] mask to a flattened [side*side] row
// mask for one attention block.
Tensor resample_mask(const Tensor& mask, int side);

}  // namespace disen
