#include "disen/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace disen {

namespace {

Tensor normal_init(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * stddev;
    return t;
}

Tensor ones(int n) {
    Tensor t({n});
    t.fill(1.0);
    return t;
}

Tensor conv_init(int out_ch, int in_ch, int k, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (in_ch * k * k));
    return normal_init({out_ch, in_ch, k, k}, rng, stddev);
}

DenoiserParams::ResBlock make_res(int channels, const ModelConfig& cfg, Rng& rng) {
    DenoiserParams::ResBlock rb;
    rb.channels = channels;
    rb.gn1_g.w = ones(channels);
    rb.gn1_b.w = Tensor({channels});
    rb.conv1_w.w = conv_init(channels, channels, 3, rng);
    rb.conv1_b.w = Tensor({channels});
    rb.time_w.w = normal_init({cfg.time_hidden, channels}, rng, 1.0 / std::sqrt(cfg.time_hidden));
    rb.time_b.w = Tensor({channels});
    rb.gn2_g.w = ones(channels);
    rb.gn2_b.w = Tensor({channels});
    rb.conv2_w.w = Tensor({channels, channels, 3, 3});  // zero: block starts as identity
    rb.conv2_b.w = Tensor({channels});
    return rb;
}

DenoiserParams::AttnBlock make_attn(int channels, const ModelConfig& cfg, Rng& rng) {
    DenoiserParams::AttnBlock ab;
    ab.channels = channels;
    ab.ln_g.w = ones(channels);
    ab.ln_b.w = Tensor({channels});
    ab.wq.w = normal_init({channels, cfg.d_attn}, rng, 1.0 / std::sqrt(channels));
    ab.wk_txt.w = normal_init({cfg.d_txt, cfg.d_attn}, rng, 1.0 / std::sqrt(cfg.d_txt));
    ab.wv_txt.w = Tensor({cfg.d_txt, channels});  // zero: path starts as no-op
    ab.wk_cpt.w = normal_init({cfg.d_u, cfg.d_attn}, rng, 1.0 / std::sqrt(cfg.d_u));
    ab.wv_cpt.w = Tensor({cfg.d_u, channels});    // zero: adapter starts as no-op
    return ab;
}

void register_res(DenoiserParams::ResBlock& rb, ad::ParamRegistry& reg) {
    reg.add(rb.gn1_g);
    reg.add(rb.gn1_b);
    reg.add(rb.conv1_w);
    reg.add(rb.conv1_b);
    reg.add(rb.time_w);
    reg.add(rb.time_b);
    reg.add(rb.gn2_g);
    reg.add(rb.gn2_b);
    reg.add(rb.conv2_w);
    reg.add(rb.conv2_b);
}

void register_attn(DenoiserParams::AttnBlock& ab, ad::ParamRegistry& reg) {
    reg.add(ab.ln_g);
    reg.add(ab.ln_b);
    reg.add(ab.wq);
    reg.add(ab.wk_txt);
    reg.add(ab.wv_txt);
    reg.add(ab.wk_cpt);
    reg.add(ab.wv_cpt);
}

constexpr double kEps = 1e-5;

ad::VarId res_block(ad::Tape& t, ad::VarId x, ad::VarId h_time,
                    const DenoiserParams::ResBlock& rb, const ModelConfig& cfg) {
    ad::VarId y = t.conv2d(
        t.silu(t.groupnorm(x, t.param(rb.gn1_g), t.param(rb.gn1_b), cfg.gn_groups, kEps)),
        t.param(rb.conv1_w), t.param(rb.conv1_b), 1);
    y = t.add_chan_bias(y, t.linear(h_time, t.param(rb.time_w), t.param(rb.time_b)));
    y = t.conv2d(
        t.silu(t.groupnorm(y, t.param(rb.gn2_g), t.param(rb.gn2_b), cfg.gn_groups, kEps)),
        t.param(rb.conv2_w), t.param(rb.conv2_b), 1);
    return t.add(x, y);
}

ad::VarId attn_block(ad::Tape& t, ad::VarId x, ad::VarId prompt,
                     const std::vector<ConceptStream>& concepts, int block_index, double mu,
                     const DenoiserParams::AttnBlock& ab, int side) {
    std::vector<BlockConcept> block_concepts;
    block_concepts.reserve(concepts.size());
    for (const ConceptStream& cs : concepts) {
        BlockConcept bc;
        bc.tokens = cs.blocks.at(static_cast<std::size_t>(block_index));
        if (!cs.mask.empty()) bc.row_mask = resample_mask(cs.mask, side);
        block_concepts.push_back(bc);
    }
    ad::VarId rows = dual_cross_attention(t, t.chw_to_rows(x), prompt, block_concepts, mu, ab);
    return t.rows_to_chw(rows, side, side);
}

}  // namespace

DenoiserParams::DenoiserParams(const ModelConfig& cfg, Rng& init) {
    cfg.validate();
    const int c0 = cfg.trunk_channels[0];
    const int c1 = cfg.trunk_channels[1];
    const int c2 = cfg.trunk_channels[2];

    time_w1.w = normal_init({cfg.time_dim, cfg.time_hidden}, init, 1.0 / std::sqrt(cfg.time_dim));
    time_b1.w = Tensor({cfg.time_hidden});

    stem_w.w = conv_init(c0, 3, 3, init);
    stem_b.w = Tensor({c0});
    enc1 = make_res(c0, cfg, init);
    down1_w.w = conv_init(c1, c0, 3, init);
    down1_b.w = Tensor({c1});
    enc2 = make_res(c1, cfg, init);
    down2_w.w = conv_init(c2, c1, 3, init);
    down2_b.w = Tensor({c2});
    mid1 = make_res(c2, cfg, init);
    mid2 = make_res(c2, cfg, init);
    up1_w.w = conv_init(c1, c2, 3, init);
    up1_b.w = Tensor({c1});
    dec2 = make_res(c1, cfg, init);
    up2_w.w = conv_init(c0, c1, 3, init);
    up2_b.w = Tensor({c0});
    dec1 = make_res(c0, cfg, init);
    out_gn_g.w = ones(c0);
    out_gn_b.w = Tensor({c0});
    out_w.w = Tensor({3, c0, 3, 3});  // zero: eps-hat starts at 0
    out_b.w = Tensor({3});

    attn.push_back(make_attn(c0, cfg, init));  // encoder @ res
    attn.push_back(make_attn(c2, cfg, init));  // bottleneck @ res/4
    attn.push_back(make_attn(c1, cfg, init));  // decoder @ res/2
    attn.push_back(make_attn(c0, cfg, init));  // decoder @ res
}

void DenoiserParams::register_params(ad::ParamRegistry& reg) {
    reg.add(time_w1);
    reg.add(time_b1);
    reg.add(stem_w);
    reg.add(stem_b);
    register_res(enc1, reg);
    register_attn(attn[0], reg);
    reg.add(down1_w);
    reg.add(down1_b);
    register_res(enc2, reg);
    reg.add(down2_w);
    reg.add(down2_b);
    register_res(mid1, reg);
    register_attn(attn[1], reg);
    register_res(mid2, reg);
    reg.add(up1_w);
    reg.add(up1_b);
    register_res(dec2, reg);
    register_attn(attn[2], reg);
    reg.add(up2_w);
    reg.add(up2_b);
    register_res(dec1, reg);
    register_attn(attn[3], reg);
    reg.add(out_gn_g);
    reg.add(out_gn_b);
    reg.add(out_w);
    reg.add(out_b);
}

std::vector<int> DenoiserParams::adapter_param_ids() const {
    std::vector<int> ids;
    for (const AttnBlock& ab : attn) {
        ids.push_back(ab.wk_cpt.id);
        ids.push_back(ab.wv_cpt.id);
    }
    return ids;
}

Tensor timestep_features(int t, int time_dim) {
    if (time_dim % 2 != 0) throw std::invalid_argument("timestep_features: time_dim must be even");
    const int half = time_dim / 2;
    Tensor out({1, time_dim});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        out.at(0, i) = std::sin(t * freq);
        out.at(0, half + i) = std::cos(t * freq);
    }
    return out;
}

Tensor resample_mask(const Tensor& mask, int side) {
    if (mask.ndim() != 2 || mask.rows() != mask.cols())
        throw std::invalid_argument("resample_mask: mask must be square [res, res]");
    if (mask.rows() % side != 0)
        throw std::invalid_argument("resample_mask: block side must divide mask resolution");
    const int f = mask.rows() / side;
    Tensor out({side * side});
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double v = mask.at(y * f, x * f);  // nearest, top-left convention
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("resample_mask: mask entries must be 0 or 1");
            out[static_cast<std::size_t>(y * side + x)] = v;
        }
    return out;
}

ad::VarId dual_cross_attention(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                               const std::vector<BlockConcept>& concepts, double mu,
                               const DenoiserParams::AttnBlock& block,
                               std::vector<Tensor>* attn_rows) {
    ad::VarId normed =
        tape.layernorm(h_rows, tape.param(block.ln_g), tape.param(block.ln_b), kEps);
    ad::VarId q = tape.matmul(normed, tape.param(block.wq));

    const double scale = 1.0 / std::sqrt(static_cast<double>(tape.value(q).cols()));
    auto attend = [&](ad::VarId keys, ad::VarId values) {
        ad::VarId w = tape.softmax_rows(tape.scale(tape.matmul_nt(q, keys), scale));
        if (attn_rows) attn_rows->push_back(tape.value(w));
        return tape.matmul(w, values);
    };

    ad::VarId out = tape.add(h_rows, attend(tape.matmul(prompt_tokens, tape.param(block.wk_txt)),
                                            tape.matmul(prompt_tokens, tape.param(block.wv_txt))));
    if (mu == 0.0) return out;

    for (const BlockConcept& bc : concepts) {
        ad::VarId contrib =
            tape.scale(attend(tape.matmul(bc.tokens, tape.param(block.wk_cpt)),
                              tape.matmul(bc.tokens, tape.param(block.wv_cpt))),
                       mu);
        if (!bc.row_mask.empty()) contrib = tape.scale_rows(contrib, bc.row_mask);
        out = tape.add(out, contrib);
    }
    return out;
}

ad::VarId dual_cross_attention(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                               ad::VarId concept_tokens, double mu,
                               const DenoiserParams::AttnBlock& block) {
    std::vector<BlockConcept> one(1);
    one[0].tokens = concept_tokens;
    return dual_cross_attention(tape, h_rows, prompt_tokens, one, mu, block);
}

ConceptStream zero_concept_stream(ad::Tape& tape, const ModelConfig& cfg) {
    ConceptStream cs;
    for (int i = 0; i < cfg.n_blocks; ++i)
        cs.blocks.push_back(tape.input(Tensor({cfg.n_q, cfg.d_u})));
    return cs;
}

ad::VarId predict_noise(ad::Tape& tape, ad::VarId z_t, int t, int T, ad::VarId prompt_tokens,
                        const std::vector<ConceptStream>& concepts, double mu,
                        const DenoiserParams& params, const ModelConfig& cfg) {
    if (t < 1 || t > T)
        throw std::invalid_argument("predict_noise: t must be in 1..T, got " + std::to_string(t));
    const Tensor& z = tape.value(z_t);
    if (z.ndim() != 3 || z.channels() != 3 || z.height() != cfg.resolution ||
        z.width() != cfg.resolution)
        throw std::invalid_argument("predict_noise: z_t must be [3," +
                                    std::to_string(cfg.resolution) + "," +
                                    std::to_string(cfg.resolution) + "], got " + z.shape_str());
    for (const ConceptStream& cs : concepts)
        if (static_cast<int>(cs.blocks.size()) != cfg.n_blocks)
            throw std::invalid_argument("predict_noise: concept must provide one block per adapter");

    const int res = cfg.resolution;
    ad::VarId h_time = tape.silu(tape.linear(tape.input(timestep_features(t, cfg.time_dim)),
                                             tape.param(params.time_w1), tape.param(params.time_b1)));

    ad::VarId h = tape.conv2d(z_t, tape.param(params.stem_w), tape.param(params.stem_b), 1);
    h = res_block(tape, h, h_time, params.enc1, cfg);
    h = attn_block(tape, h, prompt_tokens, concepts, 0, mu, params.attn[0], res);
    ad::VarId skip1 = h;  // c0 @ res

    h = tape.conv2d(h, tape.param(params.down1_w), tape.param(params.down1_b), 2);
    h = res_block(tape, h, h_time, params.enc2, cfg);
    ad::VarId skip2 = h;  // c1 @ res/2

    h = tape.conv2d(h, tape.param(params.down2_w), tape.param(params.down2_b), 2);
    h = res_block(tape, h, h_time, params.mid1, cfg);
    h = attn_block(tape, h, prompt_tokens, concepts, 1, mu, params.attn[1], res / 4);
    h = res_block(tape, h, h_time, params.mid2, cfg);

    h = tape.conv2d(tape.upsample2x(h), tape.param(params.up1_w), tape.param(params.up1_b), 1);
    h = tape.add(h, skip2);
    h = res_block(tape, h, h_time, params.dec2, cfg);
    h = attn_block(tape, h, prompt_tokens, concepts, 2, mu, params.attn[2], res / 2);

    h = tape.conv2d(tape.upsample2x(h), tape.param(params.up2_w), tape.param(params.up2_b), 1);
    h = tape.add(h, skip1);
    h = res_block(tape, h, h_time, params.dec1, cfg);
    h = attn_block(tape, h, prompt_tokens, concepts, 3, mu, params.attn[3], res);

    h = tape.silu(tape.groupnorm(h, tape.param(params.out_gn_g), tape.param(params.out_gn_b),
                                 cfg.gn_groups, kEps));
    return tape.conv2d(h, tape.param(params.out_w), tape.param(params.out_b), 1);
}

}  // namespace disen
