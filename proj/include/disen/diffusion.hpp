#pragma once

// Forward noising, the LDM objective, classifier-free guidance, deterministic
// DDIM sampling, and multi-concept combination / masked layout sampling.

#include <array>
#include <functional>
#include <vector>

#include "disen/denoiser.hpp"
#include "disen/encode.hpp"
#include "disen/extractor.hpp"
#include "disen/rng.hpp"
#include "disen/tensor.hpp"

namespace disen {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // [T+1], beta[0] unused
    std::vector<double> alpha_bar;  // [T+1], alpha_bar[0] = 1

    // Linear beta in [1e-4, 0.02] over steps 1..T.
    explicit NoiseSchedule(int steps = 1000);
};

struct SamplerConfig {
    int ddim_steps = 20;
    double omega = 5.0;  // guidance scale
    double mu = 1.0;     // concept scale
    std::uint64_t seed = 0;

    void validate(int T) const;  // 1 <= ddim_steps <= T, finite scales
};

// One concept condition for sampling: representation plus an optional {0,1}
// latent-grid mask (all bundle entries must agree on having masks or not).
struct MaskedConcept {
    ConceptRep rep;
    Tensor mask;  // [res, res] or empty
};
using ConceptBundle = std::vector<MaskedConcept>;

// z_t = sqrt(abar_t) z_0 + sqrt(1-abar_t) eps; t in 0..T.
Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched);

// Pixel [0,1] <-> latent [-1,1] mapping used by training and sampling.
Tensor image_to_latent(const Tensor& image);
Tensor latent_to_image(const Tensor& z);  // clamps to [0,1]

// eps-hat = omega * eps_cond + (1 - omega) * eps_uncond.
Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double omega);

// Denoiser abstraction for the sampler / loss: eps-hat(z_t, t).
using EpsPredictor = std::function<Tensor(const Tensor& z_t, int t)>;

// Mean over the batch of mean((eps_hat - eps)^2); t ~ U{1..T}, eps ~ N(0,1).
// Per sample the rng draws t first, then the noise elementwise.
double ldm_loss(const std::vector<Tensor>& z0_batch, const EpsPredictor& model,
                const NoiseSchedule& sched, Rng& rng);

// The DDIM timestep subset t_i = (i+1) * T / S, i = 0..S-1 (ends at T).
std::vector<int> ddim_timesteps(int ddim_steps, int T);

// Deterministic (eta = 0) DDIM recursion from z_T down to z_0 in latent space.
Tensor ddim_trajectory(Tensor z, const EpsPredictor& eps_hat, int ddim_steps,
                       const NoiseSchedule& sched);

// Full guided sampler: z_T ~ N(0,1) from the seed's sampler stream, per step
// eps-hat = cfg_combine(model(prompt, bundle), model(null prompt, zero rep)),
// final latent mapped back to a [0,1] image.
Tensor ddim_sample(const std::array<int, kPromptLen>& prompt_ids, const ConceptBundle& bundle,
                   const SamplerConfig& sampler, const NoiseSchedule& sched,
                   const DenoiserParams& dp, const EncoderParams& ep, const ModelConfig& cfg);

// Token-concatenation of concept representations; pooled recomputed over all
// blocks and tokens.
ConceptRep combine_concepts(const std::vector<ConceptRep>& reps);

// One attention-block update with per-concept masks given at latent-grid
// resolution (nearest-resampled to the block's side).
ad::VarId masked_multi_concept_step(ad::Tape& tape, ad::VarId h_rows, ad::VarId prompt_tokens,
                                    const std::vector<ad::VarId>& concept_tokens,
                                    const std::vector<Tensor>& masks, double mu,
                                    const DenoiserParams::AttnBlock& block, int side,
                                    int latent_res);

// Shared bundle validation (shapes agree, masks all-or-none and binary).
void validate_bundle(const ConceptBundle& bundle, const ModelConfig& cfg);

}  // namespace disen
