#pragma once

// Trainable toy encoders producing the conditioning features of the pipeline:
// image tokens f_I, guidance tokens f_cg, and prompt tokens c_t. They stand in
// for the paper's frozen CLIP encoders; nothing is pretrained here, so all
// tables and projections are ordinary trainable parameters.

#include <array>
#include <string>
#include <vector>

#include "disen/autograd.hpp"
#include "disen/model.hpp"
#include "disen/procgen.hpp"
#include "disen/rng.hpp"

namespace disen {

// --- closed vocabularies ------------------------------------------------------

// Guidance vocabulary: 6 shape names, "style", "composition", null.
inline constexpr int kGuidanceVocab = 9;
inline constexpr int kGuidanceNull = 8;
int guidance_token_id(const std::string& token);  // throws on out-of-vocabulary

// Prompt symbols: one row per shape class, style id, layout id, plus null.
inline constexpr int kPromptVocab = kNumShapes + kNumStyles + kNumLayouts + 1;
inline constexpr int kPromptNull = kPromptVocab - 1;
inline int prompt_shape_symbol(int shape_class) { return shape_class; }
inline int prompt_style_symbol(int style_id) { return kNumShapes + style_id; }
inline int prompt_layout_symbol(int layout_id) { return kNumShapes + kNumStyles + layout_id; }

// Fixed-length structured prompt: [slot0 shape, slot1 shape or null, style, layout].
inline constexpr int kPromptLen = 4;
std::array<int, kPromptLen> prompt_token_ids(const SceneDescription& scene);
std::array<int, kPromptLen> null_prompt_ids();
// Replaces the field(s) carrying `kind` with the null symbol.
std::array<int, kPromptLen> mask_prompt_axis(std::array<int, kPromptLen> ids, ConceptKind kind);

// --- parameters -----------------------------------------------------------------

struct EncoderParams {
    ad::Param patch_proj;   // [patch_size^2 * 3, d_img]
    ad::Param pos_emb;      // [P, d_img]
    ad::Param guid_table;   // [kGuidanceVocab, d_txt]
    ad::Param prompt_table; // [kPromptVocab, d_txt]

    EncoderParams(const ModelConfig& cfg, Rng& init);
    void register_params(ad::ParamRegistry& reg);
};

// --- operations -------------------------------------------------------------------

// f_I: linear patch projection + positional embedding -> [P, d_img].
ad::VarId encode_image(ad::Tape& tape, const Tensor& image, const EncoderParams& params,
                       const ModelConfig& cfg);

// f_cg: guidance-table lookups -> [L, d_txt].
ad::VarId encode_guidance(ad::Tape& tape, const std::vector<std::string>& tokens,
                          const EncoderParams& params);

// c_t: prompt-table lookups -> [kPromptLen, d_txt].
ad::VarId encode_prompt_ids(ad::Tape& tape, const std::array<int, kPromptLen>& ids,
                            const EncoderParams& params);
ad::VarId encode_prompt(ad::Tape& tape, const SceneDescription& scene,
                        const EncoderParams& params);

}  // namespace disen
