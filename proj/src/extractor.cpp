#include "disen/extractor.hpp"

#include <cmath>

#include "disen/encode.hpp"

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

}  // namespace

ExtractorParams::ExtractorParams(const ModelConfig& cfg, Rng& init) {
    query.w = normal_init({cfg.n_q, cfg.d_txt}, init, 0.5);
    anti_query.w = normal_init({cfg.n_q, cfg.d_txt}, init, 0.5);
    block_emb.resize(static_cast<std::size_t>(cfg.n_blocks));
    for (ad::Param& e : block_emb) e.w = normal_init({cfg.n_q, cfg.d_txt}, init, 0.5);

    layers.resize(static_cast<std::size_t>(cfg.extractor_layers));
    for (int l = 0; l < cfg.extractor_layers; ++l) {
        Layer& lay = layers[static_cast<std::size_t>(l)];
        const int dq = l == 0 ? cfg.d_txt : cfg.d_attn;
        lay.wq.w = normal_init({dq, cfg.d_attn}, init, 1.0 / std::sqrt(dq));
        lay.wk.w = normal_init({cfg.d_img, cfg.d_attn}, init, 1.0 / std::sqrt(cfg.d_img));
        lay.wv.w = normal_init({cfg.d_img, cfg.d_attn}, init, 1.0 / std::sqrt(cfg.d_img));
        if (l > 0) {
            const int dff = cfg.ffn_mult * cfg.d_attn;
            const double sd = 1.0 / std::sqrt(cfg.d_attn);
            lay.sq.w = normal_init({cfg.d_attn, cfg.d_attn}, init, sd);
            lay.sk.w = normal_init({cfg.d_attn, cfg.d_attn}, init, sd);
            lay.sv.w = normal_init({cfg.d_attn, cfg.d_attn}, init, sd);
            lay.sout.w = normal_init({cfg.d_attn, cfg.d_attn}, init, sd);
            lay.lns_g.w = ones(cfg.d_attn);
            lay.lns_b.w = Tensor({cfg.d_attn});
            lay.wout.w = normal_init({cfg.d_attn, cfg.d_attn}, init, 1.0 / std::sqrt(cfg.d_attn));
            lay.ln1_g.w = ones(cfg.d_attn);
            lay.ln1_b.w = Tensor({cfg.d_attn});
            lay.ln2_g.w = ones(cfg.d_attn);
            lay.ln2_b.w = Tensor({cfg.d_attn});
            lay.ffn_w1.w = normal_init({cfg.d_attn, dff}, init, 1.0 / std::sqrt(cfg.d_attn));
            lay.ffn_b1.w = Tensor({dff});
            lay.ffn_w2.w = normal_init({dff, cfg.d_attn}, init, 1.0 / std::sqrt(dff));
            lay.ffn_b2.w = Tensor({cfg.d_attn});
        }
    }
    out_proj.w = normal_init({cfg.d_attn, cfg.d_u}, init, 1.0 / std::sqrt(cfg.d_attn));
}

void ExtractorParams::register_params(ad::ParamRegistry& reg) {
    reg.add(query);
    reg.add(anti_query);
    for (ad::Param& e : block_emb) reg.add(e);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Layer& lay = layers[l];
        reg.add(lay.wq);
        reg.add(lay.wk);
        reg.add(lay.wv);
        if (l > 0) {
            reg.add(lay.sq);
            reg.add(lay.sk);
            reg.add(lay.sv);
            reg.add(lay.sout);
            reg.add(lay.lns_g);
            reg.add(lay.lns_b);
            reg.add(lay.wout);
            reg.add(lay.ln1_g);
            reg.add(lay.ln1_b);
            reg.add(lay.ln2_g);
            reg.add(lay.ln2_b);
            reg.add(lay.ffn_w1);
            reg.add(lay.ffn_b1);
            reg.add(lay.ffn_w2);
            reg.add(lay.ffn_b2);
        }
    }
    reg.add(out_proj);
}

ad::VarId extract_block(ad::Tape& tape, ad::VarId image_feats, ad::VarId guidance,
                        QueryKind which, int block_index, const ExtractorParams& params,
                        const ModelConfig& cfg, std::vector<Tensor>* attn_out) {
    if (block_index < 1 || block_index > cfg.n_blocks)
        throw std::invalid_argument("extract_block: block_index out of range 1..N");

    const ad::Param& q = which == QueryKind::main ? params.query : params.anti_query;
    const ad::Param& e = params.block_emb[static_cast<std::size_t>(block_index - 1)];

    // H^0 = cat(q' + e_i, f_cg); guidance rows stay part of the hidden state.
    ad::VarId h = tape.concat_rows(tape.add(tape.param(q), tape.param(e)), guidance);

    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_attn));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const ExtractorParams::Layer& lay = params.layers[l];
        ad::VarId keys = tape.matmul(image_feats, tape.param(lay.wk));
        ad::VarId values = tape.matmul(image_feats, tape.param(lay.wv));
        if (l == 0) {
            // Eq. 3 verbatim: raw cross-attention, no residual/normalization.
            ad::VarId queries = tape.matmul(h, tape.param(lay.wq));
            ad::VarId attn = tape.softmax_rows(tape.scale(tape.matmul_nt(queries, keys), scale));
            if (attn_out) attn_out->push_back(tape.value(attn));
            h = tape.matmul(attn, values);
            // Eq. 3 replaces every row with an image mixture, which would erase
            // the guidance identity the deeper layers condition on. Re-inject
            // it (as the layer-1 query projection, width d_attn): the guidance
            // rows replace their mixtures, and the mean guidance direction is
            // added to every query row so the conditioning does not depend on
            // learned attention to the guidance rows.
            if (params.layers.size() > 1) {
                ad::VarId g_proj = tape.matmul(guidance, tape.param(lay.wq));
                ad::VarId q_rows = tape.add_row(tape.slice_rows(h, 0, cfg.n_q),
                                                tape.mean_rows(g_proj));
                h = tape.concat_rows(q_rows, g_proj);
            }
        } else {
            // Self-attention over the hidden rows: the only place query rows
            // see the guidance rows, making extraction guidance-conditioned.
            ad::VarId s_in = tape.layernorm(h, tape.param(lay.lns_g), tape.param(lay.lns_b), 1e-5);
            ad::VarId s_attn = tape.softmax_rows(tape.scale(
                tape.matmul_nt(tape.matmul(s_in, tape.param(lay.sq)),
                               tape.matmul(s_in, tape.param(lay.sk))),
                scale));
            h = tape.add(h, tape.matmul(tape.matmul(s_attn, tape.matmul(s_in, tape.param(lay.sv))),
                                        tape.param(lay.sout)));
            ad::VarId normed = tape.layernorm(h, tape.param(lay.ln1_g), tape.param(lay.ln1_b), 1e-5);
            ad::VarId queries = tape.matmul(normed, tape.param(lay.wq));
            ad::VarId attn = tape.softmax_rows(tape.scale(tape.matmul_nt(queries, keys), scale));
            if (attn_out) attn_out->push_back(tape.value(attn));
            h = tape.add(h, tape.matmul(tape.matmul(attn, values), tape.param(lay.wout)));
            ad::VarId ff_in =
                tape.layernorm(h, tape.param(lay.ln2_g), tape.param(lay.ln2_b), 1e-5);
            ad::VarId ff = tape.linear(tape.silu(tape.linear(ff_in, tape.param(lay.ffn_w1),
                                                             tape.param(lay.ffn_b1))),
                                       tape.param(lay.ffn_w2), tape.param(lay.ffn_b2));
            h = tape.add(h, ff);
        }
    }

    return tape.matmul(tape.slice_rows(h, 0, cfg.n_q), tape.param(params.out_proj));
}

ConceptRepVars extract(ad::Tape& tape, ad::VarId image_feats, ad::VarId guidance,
                       QueryKind which, const ExtractorParams& params, const ModelConfig& cfg) {
    ConceptRepVars rep;
    ad::VarId all_rows = -1;
    for (int i = 1; i <= cfg.n_blocks; ++i) {
        ad::VarId block = extract_block(tape, image_feats, guidance, which, i, params, cfg);
        rep.per_block.push_back(block);
        all_rows = all_rows < 0 ? block : tape.concat_rows(all_rows, block);
    }
    rep.pooled = tape.normalize_rows(tape.mean_rows(all_rows));
    return rep;
}

Tensor attention_map(const Tensor& image, const std::vector<std::string>& guidance_tokens,
                     QueryKind which, int block_index, int layer, const EncoderParams& enc,
                     const ExtractorParams& params, const ModelConfig& cfg) {
    if (layer < 1 || layer > static_cast<int>(params.layers.size()))
        throw std::invalid_argument("attention_map: layer out of range");
    ad::Tape tape;
    ad::VarId feats = encode_image(tape, image, enc, cfg);
    ad::VarId guid = encode_guidance(tape, guidance_tokens, enc);
    std::vector<Tensor> maps;
    extract_block(tape, feats, guid, which, block_index, params, cfg, &maps);
    return maps.at(static_cast<std::size_t>(layer - 1));
}

ConceptRep extract_rep(const Tensor& image, const std::vector<std::string>& guidance_tokens,
                       QueryKind which, const EncoderParams& enc, const ExtractorParams& params,
                       const ModelConfig& cfg) {
    ad::Tape tape;
    ad::VarId feats = encode_image(tape, image, enc, cfg);
    ad::VarId guid = encode_guidance(tape, guidance_tokens, enc);
    ConceptRepVars vars = extract(tape, feats, guid, which, params, cfg);
    ConceptRep rep;
    for (ad::VarId v : vars.per_block) rep.per_block.push_back(tape.value(v));
    rep.pooled = tape.value(vars.pooled);
    return rep;
}

}  // namespace disen
