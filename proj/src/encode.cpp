#include "disen/encode.hpp"

#include <cmath>

namespace disen {

namespace {

Tensor normal_init(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * stddev;
    return t;
}

}  // namespace

int guidance_token_id(const std::string& token) {
    for (int i = 0; i < kNumShapes; ++i)
        if (token == shape_name(i)) return i;
    if (token == "style") return kNumShapes;
    if (token == "composition") return kNumShapes + 1;
    if (token == "<null>") return kGuidanceNull;
    throw std::invalid_argument("guidance_token_id: out-of-vocabulary token \"" + token + "\"");
}

std::array<int, kPromptLen> prompt_token_ids(const SceneDescription& scene) {
    std::array<int, kPromptLen> ids{};
    ids[0] = prompt_shape_symbol(scene.shapes.at(0).shape_class);
    ids[1] = scene.shapes.size() > 1 ? prompt_shape_symbol(scene.shapes[1].shape_class)
                                     : kPromptNull;
    ids[2] = prompt_style_symbol(scene.style_id());
    ids[3] = prompt_layout_symbol(scene.layout_id());
    return ids;
}

std::array<int, kPromptLen> null_prompt_ids() {
    std::array<int, kPromptLen> ids{};
    ids.fill(kPromptNull);
    return ids;
}

std::array<int, kPromptLen> mask_prompt_axis(std::array<int, kPromptLen> ids, ConceptKind kind) {
    switch (kind) {
        case ConceptKind::Content:
            ids[0] = kPromptNull;
            break;
        case ConceptKind::Style:
            ids[2] = kPromptNull;
            break;
        case ConceptKind::Composition:
            ids[3] = kPromptNull;
            break;
    }
    return ids;
}

EncoderParams::EncoderParams(const ModelConfig& cfg, Rng& init) {
    const int patch_dim = cfg.patch_size * cfg.patch_size * 3;
    patch_proj.w = normal_init({patch_dim, cfg.d_img}, init, 1.0 / std::sqrt(patch_dim));
    pos_emb.w = normal_init({cfg.num_patches(), cfg.d_img}, init, 0.5);
    guid_table.w = normal_init({kGuidanceVocab, cfg.d_txt}, init, 0.5);
    prompt_table.w = normal_init({kPromptVocab, cfg.d_txt}, init, 0.5);
}

void EncoderParams::register_params(ad::ParamRegistry& reg) {
    reg.add(patch_proj);
    reg.add(pos_emb);
    reg.add(guid_table);
    reg.add(prompt_table);
}

ad::VarId encode_image(ad::Tape& tape, const Tensor& image, const EncoderParams& params,
                       const ModelConfig& cfg) {
    if (image.ndim() != 3 || image.channels() != 3 || image.height() != cfg.resolution ||
        image.width() != cfg.resolution)
        throw std::invalid_argument("encode_image: expected [3," + std::to_string(cfg.resolution) +
                                    "," + std::to_string(cfg.resolution) + "] image, got " +
                                    image.shape_str());

    const int ps = cfg.patch_size;
    const int side = cfg.patches_per_side();
    Tensor patches({cfg.num_patches(), ps * ps * 3});
    for (int py = 0; py < side; ++py)
        for (int px = 0; px < side; ++px) {
            const int row = py * side + px;
            int col = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        patches.at(row, col++) = image.at(c, py * ps + y, px * ps + x);
        }

    ad::VarId proj = tape.matmul(tape.input(std::move(patches)), tape.param(params.patch_proj));
    return tape.add(proj, tape.param(params.pos_emb));
}

ad::VarId encode_guidance(ad::Tape& tape, const std::vector<std::string>& tokens,
                          const EncoderParams& params) {
    if (tokens.empty()) throw std::invalid_argument("encode_guidance: empty token list");
    ad::VarId table = tape.param(params.guid_table);
    ad::VarId rows = -1;
    for (const std::string& tok : tokens) {
        ad::VarId row = tape.slice_rows(table, guidance_token_id(tok), 1);
        rows = rows < 0 ? row : tape.concat_rows(rows, row);
    }
    return rows;
}

ad::VarId encode_prompt_ids(ad::Tape& tape, const std::array<int, kPromptLen>& ids,
                            const EncoderParams& params) {
    ad::VarId table = tape.param(params.prompt_table);
    ad::VarId rows = -1;
    for (int id : ids) {
        if (id < 0 || id >= kPromptVocab)
            throw std::invalid_argument("encode_prompt_ids: symbol out of range");
        ad::VarId row = tape.slice_rows(table, id, 1);
        rows = rows < 0 ? row : tape.concat_rows(rows, row);
    }
    return rows;
}

ad::VarId encode_prompt(ad::Tape& tape, const SceneDescription& scene,
                        const EncoderParams& params) {
    return encode_prompt_ids(tape, prompt_token_ids(scene), params);
}

}  // namespace disen
