#pragma once

// The concept extractor E: a small query-transformer that cross-attends a
// learnable query (main or anti), offset by a per-denoiser-block embedding and
// concatenated with the guidance tokens, over the image tokens f_I. Layer 1 is
// the raw attention of Eq. 3; deeper layers are standard pre-LN residual
// blocks of self-attention over the query+guidance rows (the Q-Former-style
// mixing that lets guidance steer what the queries extract), cross-attention
// over f_I, and a feed-forward. The output keeps only the n_q query rows,
// projected to the adapter token width d_u.

#include <vector>

#include "disen/autograd.hpp"
#include "disen/model.hpp"
#include "disen/rng.hpp"

namespace disen {

enum class QueryKind { main, anti };

struct ExtractorParams {
    ad::Param query;       // q   [n_q, d_txt]
    ad::Param anti_query;  // q_a [n_q, d_txt]
    std::vector<ad::Param> block_emb;  // e_1..e_N, each [n_q, d_txt]

    struct Layer {
        // layer 1: raw attention, only wq/wk/wv exist
        ad::Param wq;  // [d_txt, d_attn] (layer 1) or [d_attn, d_attn] (deeper)
        ad::Param wk;  // [d_img, d_attn]
        ad::Param wv;  // [d_img, d_attn]
        // layers >= 2 additionally: self-attention over the hidden rows
        // (queries mix with guidance here), then cross-attention + FFN.
        ad::Param sq, sk, sv, sout;          // each [d_attn, d_attn]
        ad::Param lns_g, lns_b;
        ad::Param wout;                      // [d_attn, d_attn]
        ad::Param ln1_g, ln1_b, ln2_g, ln2_b;
        ad::Param ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<Layer> layers;  // size extractor_layers

    ad::Param out_proj;  // [d_attn, d_u]

    ExtractorParams(const ModelConfig& cfg, Rng& init);
    void register_params(ad::ParamRegistry& reg);
};

// Tape-level concept representation: per-block token matrices plus the pooled
// unit vector used by the contrastive loss.
struct ConceptRepVars {
    std::vector<ad::VarId> per_block;  // N entries, each [n_q, d_u]
    ad::VarId pooled = -1;             // [1, d_u], L2-normalized
};

// Value-level counterpart used at inference/evaluation time.
struct ConceptRep {
    std::vector<Tensor> per_block;
    Tensor pooled;
};

// One block's extraction. `attn_out`, when non-null, receives the post-softmax
// attention weights of every layer ((n_q+L) x P each).
ad::VarId extract_block(ad::Tape& tape, ad::VarId image_feats, ad::VarId guidance,
                        QueryKind which, int block_index, const ExtractorParams& params,
                        const ModelConfig& cfg, std::vector<Tensor>* attn_out = nullptr);

// All N blocks plus pooling.
ConceptRepVars extract(ad::Tape& tape, ad::VarId image_feats, ad::VarId guidance,
                       QueryKind which, const ExtractorParams& params, const ModelConfig& cfg);

// Post-softmax attention weights of one (block, layer); layer is 1-based.
Tensor attention_map(const Tensor& image, const std::vector<std::string>& guidance_tokens,
                     QueryKind which, int block_index, int layer,
                     const struct EncoderParams& enc, const ExtractorParams& params,
                     const ModelConfig& cfg);

// Value-level extraction for sampling/evaluation: encodes the image and
// guidance on a throwaway tape and copies the results out.
ConceptRep extract_rep(const Tensor& image, const std::vector<std::string>& guidance_tokens,
                       QueryKind which, const struct EncoderParams& enc,
                       const ExtractorParams& params, const ModelConfig& cfg);

}  // namespace disen
