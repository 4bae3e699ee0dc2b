#include "disen/gradcheck.hpp"

#include <cmath>
#include <cstddef>

#include "disen/autograd.hpp"
#include "disen/cod.hpp"
#include "disen/denoiser.hpp"
#include "disen/extractor.hpp"
#include "disen/procgen.hpp"
#include "disen/rng.hpp"
#include "disen/trainloop.hpp"

namespace disen {

namespace {

constexpr double kEps = 1e-5;

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = lo + (hi - lo) * rng.uniform01();
    return t;
}

Tensor random_unit(Rng& rng, int dim) {
    Tensor t({1, dim});
    double sq = 0.0;
    do {
        sq = 0.0;
        for (int i = 0; i < dim; ++i) {
            t[static_cast<std::size_t>(i)] = rng.normal();
            sq += t[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)];
        }
    } while (sq < 1e-8);
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= inv;
    return t;
}

// rel error with a floor so near-zero finite differences do not divide away
// the signal; the suite tolerance is applied to this ratio.
void fold(GradCheckResult& r, double analytic, double fd, double floor) {
    const double rel = std::fabs(analytic - fd) / std::max(floor, std::fabs(fd));
    if (rel > r.max_rel_err) r.max_rel_err = rel;
    ++r.probes;
}

// --- suites 1 & 2: the contrastive loss heads -------------------------------

GradCheckResult check_loss_head(std::uint64_t seed, bool use_cod) {
    GradCheckResult r;
    r.name = use_cod ? "cod_loss" : "cd_loss";
    r.tolerance = 1e-4;
    Rng rng = substream(seed, Stream::param_init, use_cod ? 1 : 2);
    const int dim = 8;

    for (int trial = 0; trial < 6; ++trial) {
        Tensor vecs[3];
        // keep |cos(f_a, f_tar)| away from the kink of |.| in cod
        do {
            for (Tensor& v : vecs) v = random_unit(rng, dim);
            double d = 0.0;
            for (int i = 0; i < dim; ++i)
                d += vecs[1][static_cast<std::size_t>(i)] * vecs[2][static_cast<std::size_t>(i)];
            if (std::fabs(d) > 0.05) break;
        } while (true);

        Tensor grads[3];
        {
            ad::Tape tape;
            const ad::VarId cpt = tape.input(vecs[0]);
            const ad::VarId a = tape.input(vecs[1]);
            const ad::VarId tar = tape.input(vecs[2]);
            tape.backward(use_cod ? cod_loss(tape, cpt, a, tar) : cd_loss(tape, cpt, a, tar));
            grads[0] = tape.grad(cpt);
            grads[1] = tape.grad(a);
            grads[2] = tape.grad(tar);
        }

        auto value = [&]() {
            return use_cod ? cod_loss(vecs[0], vecs[1], vecs[2])
                           : cd_loss(vecs[0], vecs[1], vecs[2]);
        };
        for (int v = 0; v < 3; ++v)
            for (int i = 0; i < dim; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i);
                const double saved = vecs[v][idx];
                vecs[v][idx] = saved + kEps;
                const double up = value();
                vecs[v][idx] = saved - kEps;
                const double dn = value();
                vecs[v][idx] = saved;
                fold(r, grads[v][idx], (up - dn) / (2.0 * kEps), 0.05);
            }
    }
    r.pass = r.max_rel_err < r.tolerance;
    return r;
}

// --- suite 3: extractor pooled output ----------------------------------------

GradCheckResult check_extractor(std::uint64_t seed) {
    GradCheckResult r;
    r.name = "extractor_pooled";
    r.tolerance = 1e-4;

    ModelConfig cfg;
    cfg.d_img = 7;
    cfg.d_txt = 5;
    cfg.d_attn = 6;
    cfg.d_u = 4;
    cfg.n_q = 3;
    cfg.extractor_layers = 2;

    Rng rng = substream(seed, Stream::param_init, 3);
    ExtractorParams params(cfg, rng);
    ad::ParamRegistry reg;
    params.register_params(reg);
    const Tensor feats = random_tensor({9, cfg.d_img}, rng);
    const Tensor guidance = random_tensor({1, cfg.d_txt}, rng);
    const Tensor probe = random_tensor({1, cfg.d_u}, rng);

    auto loss_value = [&]() {
        ad::Tape tape;
        ConceptRepVars rep = extract(tape, tape.input(feats), tape.input(guidance),
                                     QueryKind::main, params, cfg);
        return tape.value(tape.sum_mul(rep.pooled, tape.input(probe))).item();
    };

    std::vector<Tensor> grads = reg.make_buffers();
    {
        ad::Tape tape;
        ConceptRepVars rep = extract(tape, tape.input(feats), tape.input(guidance),
                                     QueryKind::main, params, cfg);
        tape.backward(tape.sum_mul(rep.pooled, tape.input(probe)));
        tape.add_param_grads(grads);
    }

    ad::Param* checked[] = {&params.query,         &params.block_emb[0],
                            &params.layers[0].wq,  &params.layers[0].wk,
                            &params.layers[0].wv,  &params.layers[1].sq,
                            &params.layers[1].sout, &params.layers[1].ffn_w1,
                            &params.out_proj};
    Rng pick = substream(seed, Stream::param_init, 4);
    for (ad::Param* p : checked)
        for (int trial = 0; trial < 6; ++trial) {
            const std::size_t idx = pick.below(p->w.numel());
            const double saved = p->w[idx];
            p->w[idx] = saved + kEps;
            const double up = loss_value();
            p->w[idx] = saved - kEps;
            const double dn = loss_value();
            p->w[idx] = saved;
            fold(r, grads[static_cast<std::size_t>(p->id)][idx], (up - dn) / (2.0 * kEps), 0.05);
        }
    r.pass = r.max_rel_err < r.tolerance;
    return r;
}

// --- suite 4: denoiser dual cross-attention ----------------------------------

GradCheckResult check_dual_attention(std::uint64_t seed) {
    GradCheckResult r;
    r.name = "dual_cross_attention";
    r.tolerance = 1e-4;

    ModelConfig cfg;
    cfg.resolution = 8;
    cfg.patch_size = 4;
    cfg.d_img = 6;
    cfg.d_txt = 6;
    cfg.d_attn = 6;
    cfg.d_u = 4;
    cfg.n_q = 2;
    cfg.extractor_layers = 1;
    cfg.trunk_channels = {4, 6, 8};
    cfg.gn_groups = 2;
    cfg.time_dim = 8;
    cfg.time_hidden = 8;

    ModelParams mp(cfg, seed ^ 0x9e3779b97f4a7c15ull);
    DenoiserParams::AttnBlock& block = mp.den.attn[0];
    Rng rng = substream(seed, Stream::param_init, 5);
    // wv_txt / wv_cpt are zero-initialized; give them signal so every path of
    // Eq. 4 contributes to the output under test.
    for (std::size_t i = 0; i < block.wv_txt.w.numel(); ++i) block.wv_txt.w[i] = 0.3 * rng.normal();
    for (std::size_t i = 0; i < block.wv_cpt.w.numel(); ++i) block.wv_cpt.w[i] = 0.3 * rng.normal();

    const Tensor rows = random_tensor({5, block.channels}, rng);
    const Tensor prompt = random_tensor({4, cfg.d_txt}, rng);
    const Tensor cpt_tokens = random_tensor({cfg.n_q, cfg.d_u}, rng);
    const Tensor probe = random_tensor({5, block.channels}, rng);
    const double mu = 0.7;

    auto loss_value = [&]() {
        ad::Tape tape;
        const ad::VarId out = dual_cross_attention(tape, tape.input(rows), tape.input(prompt),
                                                   tape.input(cpt_tokens), mu, block);
        return tape.value(tape.sum_mul(out, tape.input(probe))).item();
    };

    std::vector<Tensor> grads = mp.reg.make_buffers();
    {
        ad::Tape tape;
        const ad::VarId out = dual_cross_attention(tape, tape.input(rows), tape.input(prompt),
                                                   tape.input(cpt_tokens), mu, block);
        tape.backward(tape.sum_mul(out, tape.input(probe)));
        tape.add_param_grads(grads);
    }

    ad::Param* checked[] = {&block.wq,     &block.wk_txt, &block.wv_txt, &block.wk_cpt,
                            &block.wv_cpt, &block.ln_g,   &block.ln_b};
    Rng pick = substream(seed, Stream::param_init, 6);
    for (ad::Param* p : checked)
        for (int trial = 0; trial < 6; ++trial) {
            const std::size_t idx = pick.below(p->w.numel());
            const double saved = p->w[idx];
            p->w[idx] = saved + kEps;
            const double up = loss_value();
            p->w[idx] = saved - kEps;
            const double dn = loss_value();
            p->w[idx] = saved;
            fold(r, grads[static_cast<std::size_t>(p->id)][idx], (up - dn) / (2.0 * kEps), 0.05);
        }
    r.pass = r.max_rel_err < r.tolerance;
    return r;
}

// --- suite 5: end-to-end train-step total on the micro model -----------------

GradCheckResult check_train_step(std::uint64_t seed) {
    GradCheckResult r;
    r.name = "train_step_total";
    r.tolerance = 1e-3;

    ModelConfig cfg;
    cfg.resolution = 8;
    cfg.patch_size = 4;
    cfg.d_img = 6;
    cfg.d_txt = 6;
    cfg.d_attn = 6;
    cfg.d_u = 4;
    cfg.n_q = 2;
    cfg.extractor_layers = 1;
    cfg.trunk_channels = {4, 6, 8};
    cfg.gn_groups = 2;
    cfg.time_dim = 8;
    cfg.time_hidden = 8;

    Rng img_rng = substream(seed, Stream::param_init, 7);
    std::vector<PairedSample> samples;
    samples.push_back(sample_pair(5, ConceptKind::Content));
    samples.push_back(sample_pair(6, ConceptKind::Style));
    for (PairedSample& s : samples) {
        s.ref_image = random_tensor({3, cfg.resolution, cfg.resolution}, img_rng, 0.0, 1.0);
        s.tar_image = random_tensor({3, cfg.resolution, cfg.resolution}, img_rng, 0.0, 1.0);
    }
    const std::vector<const PairedSample*> batch = {&samples[0], &samples[1]};

    TrainConfig tc;
    tc.warmup_steps = 1;
    tc.main_steps = 2;
    tc.batch_size = 2;
    tc.timesteps = 25;
    tc.cond_dropout = 0.0;
    tc.lambda = 0.05;
    tc.seed = seed;
    const NoiseSchedule sched(tc.timesteps);
    const std::int64_t step = 3;

    ModelParams mp(cfg, seed + 1);
    std::vector<Tensor> grads = mp.reg.make_buffers();
    accumulate_gradients(batch, mp, tc, sched, step, false, grads);

    auto total_at = [&]() {
        std::vector<Tensor> scratch = mp.reg.make_buffers();
        return accumulate_gradients(batch, mp, tc, sched, step, false, scratch).total;
    };

    ad::Param* checked[] = {&mp.ext.block_emb[0], &mp.ext.query,    &mp.ext.anti_query,
                            &mp.den.attn[1].wk_cpt, &mp.den.attn[0].wq, &mp.enc.patch_proj,
                            &mp.den.mid1.conv1_w, &mp.enc.prompt_table};
    Rng pick = substream(seed, Stream::param_init, 8);
    for (ad::Param* p : checked)
        for (int trial = 0; trial < 3; ++trial) {
            const std::size_t idx = pick.below(p->w.numel());
            const double saved = p->w[idx];
            p->w[idx] = saved + kEps;
            const double up = total_at();
            p->w[idx] = saved - kEps;
            const double dn = total_at();
            p->w[idx] = saved;
            fold(r, grads[static_cast<std::size_t>(p->id)][idx], (up - dn) / (2.0 * kEps), 1e-4);
        }
    r.pass = r.max_rel_err < r.tolerance;
    return r;
}

}  // namespace

std::vector<GradCheckResult> run_grad_checks(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    out.push_back(check_loss_head(seed, true));
    out.push_back(check_loss_head(seed, false));
    out.push_back(check_extractor(seed));
    out.push_back(check_dual_attention(seed));
    out.push_back(check_train_step(seed));
    return out;
}

}  // namespace disen
