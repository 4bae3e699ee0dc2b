#include "disen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace disen {

NoiseSchedule::NoiseSchedule(int steps) : T(steps) {
    if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
    beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    const double lo = 1e-4, hi = 0.02;
    for (int t = 1; t <= T; ++t) {
        beta[static_cast<std::size_t>(t)] =
            T == 1 ? lo : lo + (hi - lo) * (t - 1) / static_cast<double>(T - 1);
        alpha_bar[static_cast<std::size_t>(t)] =
            alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - beta[static_cast<std::size_t>(t)]);
    }
}

void SamplerConfig::validate(int T) const {
    if (ddim_steps < 1 || ddim_steps > T)
        throw std::invalid_argument("sampler: ddim_steps must be in 1..T");
    if (!std::isfinite(omega) || !std::isfinite(mu))
        throw std::invalid_argument("sampler: omega and mu must be finite");
}

Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    if (t < 0 || t > sched.T)
        throw std::invalid_argument("add_noise: t must be in 0..T, got " + std::to_string(t));
    z0.check_same_shape(eps, "add_noise");
    const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

Tensor image_to_latent(const Tensor& image) {
    Tensor z(image.shape());
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = 2.0 * image[i] - 1.0;
    return z;
}

Tensor latent_to_image(const Tensor& z) {
    Tensor v(z.shape());
    for (std::size_t i = 0; i < v.numel(); ++i)
        v[i] = std::clamp((z[i] + 1.0) / 2.0, 0.0, 1.0);
    return v;
}

Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double omega) {
    eps_cond.check_same_shape(eps_uncond, "cfg_combine");
    Tensor out(eps_cond.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = omega * eps_cond[i] + (1.0 - omega) * eps_uncond[i];
    return out;
}

double ldm_loss(const std::vector<Tensor>& z0_batch, const EpsPredictor& model,
                const NoiseSchedule& sched, Rng& rng) {
    if (z0_batch.empty()) throw std::invalid_argument("ldm_loss: empty batch");
    double total = 0.0;
    for (const Tensor& z0 : z0_batch) {
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T)));
        Tensor eps(z0.shape());
        for (std::size_t i = 0; i < eps.numel(); ++i) eps[i] = rng.normal();
        Tensor pred = model(add_noise(z0, t, eps, sched), t);
        pred.check_same_shape(eps, "ldm_loss");
        double se = 0.0;
        for (std::size_t i = 0; i < eps.numel(); ++i) {
            const double d = pred[i] - eps[i];
            se += d * d;
        }
        total += se / static_cast<double>(eps.numel());
    }
    return total / static_cast<double>(z0_batch.size());
}

std::vector<int> ddim_timesteps(int ddim_steps, int T) {
    if (ddim_steps < 1 || ddim_steps > T)
        throw std::invalid_argument("ddim_timesteps: need 1 <= ddim_steps <= T");
    std::vector<int> ts(static_cast<std::size_t>(ddim_steps));
    for (int i = 0; i < ddim_steps; ++i)
        ts[static_cast<std::size_t>(i)] = static_cast<int>(
            (static_cast<long long>(i) + 1) * T / ddim_steps);
    return ts;
}

Tensor ddim_trajectory(Tensor z, const EpsPredictor& eps_hat, int ddim_steps,
                       const NoiseSchedule& sched) {
    const std::vector<int> ts = ddim_timesteps(ddim_steps, sched.T);
    for (int i = ddim_steps - 1; i >= 0; --i) {
        const int t = ts[static_cast<std::size_t>(i)];
        const int tp = i == 0 ? 0 : ts[static_cast<std::size_t>(i) - 1];
        const Tensor e = eps_hat(z, t);
        e.check_same_shape(z, "ddim_trajectory");
        const double sab = std::sqrt(sched.alpha_bar[static_cast<std::size_t>(t)]);
        const double s1 = std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]);
        const double sabp = std::sqrt(sched.alpha_bar[static_cast<std::size_t>(tp)]);
        const double s1p = std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(tp)]);
        for (std::size_t k = 0; k < z.numel(); ++k) {
            const double z0_hat = (z[k] - s1 * e[k]) / sab;
            z[k] = sabp * z0_hat + s1p * e[k];
        }
    }
    return z;
}

void validate_bundle(const ConceptBundle& bundle, const ModelConfig& cfg) {
    bool any_mask = false, all_mask = true;
    for (const MaskedConcept& mc : bundle) {
        if (static_cast<int>(mc.rep.per_block.size()) != cfg.n_blocks)
            throw std::invalid_argument("bundle: concept must have one block entry per adapter");
        for (const Tensor& b : mc.rep.per_block)
            if (b.cols() != cfg.d_u)
                throw std::invalid_argument("bundle: concept token width must equal d_u");
        if (mc.mask.empty()) {
            all_mask = false;
        } else {
            any_mask = true;
            if (mc.mask.ndim() != 2 || mc.mask.rows() != cfg.resolution ||
                mc.mask.cols() != cfg.resolution)
                throw std::invalid_argument("bundle: masks must be [res, res]");
            for (std::size_t i = 0; i < mc.mask.numel(); ++i)
                if (mc.mask[i] != 0.0 && mc.mask[i] != 1.0)
                    throw std::invalid_argument("bundle: masks must be 0/1-valued");
        }
    }
    if (any_mask && !all_mask)
        throw std::invalid_argument("bundle: either all concepts carry masks or none do");
}

Tensor ddim_sample(const std::array<int, kPromptLen>& prompt_ids, const ConceptBundle& bundle,
                   const SamplerConfig& sampler, const NoiseSchedule& sched,
                   const DenoiserParams& dp, const EncoderParams& ep, const ModelConfig& cfg) {
    sampler.validate(sched.T);
    validate_bundle(bundle, cfg);

    Rng rng(substream(sampler.seed, Stream::sampler_init, 0, 0, 0));
    Tensor z({3, cfg.resolution, cfg.resolution});
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();

    EpsPredictor guided = [&](const Tensor& z_t, int t) {
        ad::Tape tape;
        ad::VarId zv = tape.input(z_t);

        std::vector<ConceptStream> cond;
        for (const MaskedConcept& mc : bundle) {
            ConceptStream cs;
            for (const Tensor& block : mc.rep.per_block) cs.blocks.push_back(tape.input(block));
            cs.mask = mc.mask;
            cond.push_back(std::move(cs));
        }
        if (cond.empty()) cond.push_back(zero_concept_stream(tape, cfg));

        ad::VarId e_cond = predict_noise(tape, zv, t, sched.T,
                                         encode_prompt_ids(tape, prompt_ids, ep), cond,
                                         sampler.mu, dp, cfg);
        if (sampler.omega == 1.0) return tape.value(e_cond);

        std::vector<ConceptStream> null_cond{zero_concept_stream(tape, cfg)};
        ad::VarId e_uncond = predict_noise(tape, zv, t, sched.T,
                                           encode_prompt_ids(tape, null_prompt_ids(), ep),
                                           null_cond, sampler.mu, dp, cfg);
        return cfg_combine(tape.value(e_cond), tape.value(e_uncond), sampler.omega);
    };

    return latent_to_image(ddim_trajectory(std::move(z), guided, sampler.ddim_steps, sched));
}

ConceptRep combine_concepts(const std::vector<ConceptRep>& reps) {
    if (reps.empty()) throw std::invalid_argument("combine_concepts: empty list");
    const std::size_t n_blocks = reps[0].per_block.size();
    const int d_u = reps[0].per_block.at(0).cols();
    for (const ConceptRep& r : reps) {
        if (r.per_block.size() != n_blocks)
            throw std::invalid_argument("combine_concepts: block counts differ");
        for (const Tensor& b : r.per_block)
            if (b.cols() != d_u)
                throw std::invalid_argument("combine_concepts: token widths differ");
    }

    ConceptRep out;
    for (std::size_t i = 0; i < n_blocks; ++i) {
        int rows = 0;
        for (const ConceptRep& r : reps) rows += r.per_block[i].rows();
        Tensor block({rows, d_u});
        int at = 0;
        for (const ConceptRep& r : reps)
            for (int rr = 0; rr < r.per_block[i].rows(); ++rr, ++at)
                for (int c = 0; c < d_u; ++c) block.at(at, c) = r.per_block[i].at(rr, c);
        out.per_block.push_back(std::move(block));
    }

    // Same pooling as extract: mean over all blocks/tokens, L2-normalized with
    // the tape's epsilon so combined and extracted pooled vectors compare 1:1.
    Tensor mean({1, d_u});
    int count = 0;
    for (const Tensor& b : out.per_block) count += b.rows();
    for (const Tensor& b : out.per_block)
        for (int r = 0; r < b.rows(); ++r)
            for (int c = 0; c < d_u; ++c) mean.at(0, c) += b.at(r, c);
    for (int c = 0; c < d_u; ++c) mean.at(0, c) /= count;
    double sq = 0.0;
    for (int c = 0; c < d_u; ++c) sq += mean.at(0, c) * mean.at(0, c);
    const double inv = 1.0 / std::sqrt(sq + 1e-12);
    out.pooled = Tensor({1, d_u});
    for (int c = 0; c < d_u; ++c) out.pooled.at(0, c) = mean.at(0, c) * inv;
    return out;
}

ad::VarId masked_multi_concept_step(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                                    const std::vector<ad::VarId>& concept_tokens,
                                    const std::vector<Tensor>& masks, double mu,
                                    const DenoiserParams::AttnBlock& block, int side,
                                    int latent_res) {
    if (!masks.empty() && masks.size() != concept_tokens.size())
        throw std::invalid_argument("masked_multi_concept_step: one mask per concept");
    std::vector<BlockConcept> concepts(concept_tokens.size());
    for (std::size_t k = 0; k < concept_tokens.size(); ++k) {
        concepts[k].tokens = concept_tokens[k];
        if (!masks.empty()) {
            if (masks[k].ndim() != 2 || masks[k].rows() != latent_res ||
                masks[k].cols() != latent_res)
                throw std::invalid_argument(
                    "masked_multi_concept_step: masks must match the latent grid");
            concepts[k].row_mask = resample_mask(masks[k], side);
        }
    }
    return dual_cross_attention(tape, h_rows, prompt_tokens, concepts, mu, block);
}

}  // namespace disen
