#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "disen/diffusion.hpp"
#include "helpers.hpp"
#include "ref/naive.hpp"

using namespace disen;
using testutil::bit_equal;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.resolution = 8;
    cfg.patch_size = 4;
    cfg.d_img = 6;
    cfg.d_txt = 5;
    cfg.d_attn = 6;
    cfg.d_u = 4;
    cfg.n_q = 3;
    cfg.trunk_channels = {4, 6, 8};
    cfg.gn_groups = 2;
    cfg.time_dim = 8;
    cfg.time_hidden = 8;
    return cfg;
}

ConceptRep random_rep(const ModelConfig& cfg, Rng& rng, int tokens_per_block = -1) {
    if (tokens_per_block < 0) tokens_per_block = cfg.n_q;
    ConceptRep rep;
    for (int i = 0; i < cfg.n_blocks; ++i)
        rep.per_block.push_back(random_tensor({tokens_per_block, cfg.d_u}, rng));
    Tensor mean({1, cfg.d_u});
    int count = cfg.n_blocks * tokens_per_block;
    for (const Tensor& b : rep.per_block)
        for (int r = 0; r < b.rows(); ++r)
            for (int c = 0; c < cfg.d_u; ++c) mean.at(0, c) += b.at(r, c);
    double sq = 0.0;
    for (int c = 0; c < cfg.d_u; ++c) {
        mean.at(0, c) /= count;
        sq += mean.at(0, c) * mean.at(0, c);
    }
    rep.pooled = Tensor({1, cfg.d_u});
    for (int c = 0; c < cfg.d_u; ++c) rep.pooled.at(0, c) = mean.at(0, c) / std::sqrt(sq + 1e-12);
    return rep;
}

}  // namespace

TEST_CASE("noise schedule: abar_0 = 1, strictly decreasing, linear beta endpoints") {
    NoiseSchedule s(1000);
    CHECK(s.T == 1000);
    CHECK(s.alpha_bar[0] == 1.0);
    CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta[1000] == doctest::Approx(0.02).epsilon(1e-12));
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.beta[t] >= 1e-4);
        CHECK(s.beta[t] <= 0.02 + 1e-15);
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(s.alpha_bar[t] > 0.0);
        CHECK(s.alpha_bar[t] <= 1.0);
    }
    NoiseSchedule one(1);
    CHECK(one.beta[1] == 1e-4);
    CHECK_THROWS_AS(NoiseSchedule(0), std::invalid_argument);
}

TEST_CASE("add_noise: identity at t=0, range checks, linearity") {
    NoiseSchedule s(100);
    Rng rng(401);
    Tensor z0 = random_tensor({3, 4, 4}, rng);
    Tensor eps = random_tensor({3, 4, 4}, rng);

    CHECK(bit_equal(add_noise(z0, 0, eps, s), z0));
    CHECK_THROWS_AS((void)add_noise(z0, -1, eps, s), std::invalid_argument);
    CHECK_THROWS_AS((void)add_noise(z0, 101, eps, s), std::invalid_argument);
    CHECK_THROWS_AS((void)add_noise(z0, 5, Tensor({3, 2, 2}), s), std::invalid_argument);

    Tensor z0x2(z0.shape());
    for (std::size_t i = 0; i < z0.numel(); ++i) z0x2[i] = 2.0 * z0[i];
    Tensor a = add_noise(z0x2, 40, eps, s);
    Tensor b = add_noise(z0, 40, eps, s);
    const double sab = std::sqrt(s.alpha_bar[40]);
    for (std::size_t i = 0; i < z0.numel(); ++i)
        CHECK(std::fabs((a[i] - b[i]) - sab * z0[i]) < 1e-12);
}

TEST_CASE("variance law: Var(z_t) matches 1 - abar_t over 1e5 draws") {
    NoiseSchedule s(1000);
    Tensor zero({1});
    Rng rng(402);
    for (int t : {100, 500, 1000}) {
        double sum_sq = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            Tensor eps({1});
            eps[0] = rng.normal();
            sum_sq += add_noise(zero, t, eps, s)[0] * add_noise(zero, t, eps, s)[0];
        }
        const double want = 1.0 - s.alpha_bar[static_cast<std::size_t>(t)];
        CHECK(std::fabs(sum_sq / n - want) < 0.02 * want);
    }
}

TEST_CASE("latent mapping: affine, inverse on range, clamped outside") {
    Rng rng(403);
    Tensor img = random_tensor({3, 2, 2}, rng, 0.0, 1.0);
    Tensor z = image_to_latent(img);
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(z[i] == doctest::Approx(2 * img[i] - 1));
    CHECK(max_abs_diff(latent_to_image(z), img) < 1e-12);

    Tensor wild({2});
    wild[0] = -3.0;
    wild[1] = 9.0;
    Tensor back = latent_to_image(wild);
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);
}

TEST_CASE("cfg_combine endpoints, scalar case, and fixed point") {
    Rng rng(404);
    Tensor c = random_tensor({3, 2, 2}, rng);
    Tensor u = random_tensor({3, 2, 2}, rng);

    CHECK(bit_equal(cfg_combine(c, u, 1.0), c));
    CHECK(bit_equal(cfg_combine(c, u, 0.0), u));

    Tensor sc({1}), su({1});
    sc[0] = 0.2;
    su[0] = 0.1;
    CHECK(std::fabs(cfg_combine(sc, su, 5.0)[0] - 0.6) < 1e-12);

    for (double omega : {-2.0, 0.3, 1.0, 5.0, 17.5}) {
        Tensor fp = cfg_combine(c, c, omega);
        CHECK(max_abs_diff(fp, c) < 1e-12);
    }
    CHECK_THROWS_AS((void)cfg_combine(c, Tensor({2}), 5.0), std::invalid_argument);
}

TEST_CASE("ldm_loss: zero for a perfect stub, ~1 for a zero stub, non-negative") {
    NoiseSchedule s(50);

    // Perfect stub: replay the loss's own rng stream to recover the exact eps.
    {
        const std::uint64_t seed = 405;
        std::vector<Tensor> batch(6, Tensor({3, 4, 4}));
        Rng replay(seed);
        std::vector<Tensor> eps_list;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            (void)replay.below(static_cast<std::uint64_t>(s.T));
            Tensor e({3, 4, 4});
            for (std::size_t k = 0; k < e.numel(); ++k) e[k] = replay.normal();
            eps_list.push_back(e);
        }
        std::size_t call = 0;
        EpsPredictor perfect = [&](const Tensor&, int) { return eps_list.at(call++); };
        Rng rng(seed);
        CHECK(ldm_loss(batch, perfect, s, rng) == 0.0);
    }

    // Zero stub: loss estimates E[eps^2] = 1.
    {
        std::vector<Tensor> batch(200, Tensor({3, 8, 8}));
        EpsPredictor zero = [](const Tensor& z_t, int) { return Tensor(z_t.shape()); };
        Rng rng(406);
        const double loss = ldm_loss(batch, zero, s, rng);
        CHECK(loss > 0.95);
        CHECK(loss < 1.05);
    }

    // Random stub: non-negative.
    {
        std::vector<Tensor> batch(3, Tensor({2, 2}));
        Rng noise(407);
        EpsPredictor crazy = [&](const Tensor& z_t, int) {
            Tensor out(z_t.shape());
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = noise.normal() * 3.0;
            return out;
        };
        Rng rng(408);
        CHECK(ldm_loss(batch, crazy, s, rng) >= 0.0);
        CHECK_THROWS_AS((void)ldm_loss({}, crazy, s, rng), std::invalid_argument);
    }
}

TEST_CASE("ddim timestep subsets end at T and increase strictly") {
    std::vector<int> ts = ddim_timesteps(20, 1000);
    REQUIRE(ts.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(ts[static_cast<std::size_t>(i)] == 50 * (i + 1));

    std::vector<int> full = ddim_timesteps(10, 10);
    for (int i = 0; i < 10; ++i) CHECK(full[static_cast<std::size_t>(i)] == i + 1);

    CHECK(ddim_timesteps(1, 1000) == std::vector<int>{1000});
    for (int s : {3, 7, 13, 999}) {
        std::vector<int> sub = ddim_timesteps(s, 1000);
        CHECK(sub.back() == 1000);
        CHECK(sub.front() >= 1);
        for (std::size_t i = 1; i < sub.size(); ++i) CHECK(sub[i] > sub[i - 1]);
    }
    CHECK_THROWS_AS((void)ddim_timesteps(0, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)ddim_timesteps(11, 10), std::invalid_argument);
}

TEST_CASE("zero-stub DDIM matches the closed-form telescoped trajectory") {
    NoiseSchedule s(50);
    Rng rng(409);
    Tensor z = random_tensor({1, 3}, rng);
    EpsPredictor zero = [](const Tensor& z_t, int) { return Tensor(z_t.shape()); };

    const double scale = 1.0 / std::sqrt(s.alpha_bar[50]);
    for (int steps : {7, 20, 50}) {  // 50 = full schedule
        Tensor got = ddim_trajectory(z, zero, steps, s);
        for (std::size_t i = 0; i < z.numel(); ++i)
            CHECK(std::fabs(got[i] - z[i] * scale) < 1e-6 * std::fabs(z[i] * scale));
    }
}

TEST_CASE("DDIM inverts add_noise when the stub returns the true noise") {
    NoiseSchedule s(1000);
    Rng rng(410);
    Tensor z0 = random_tensor({3, 4, 4}, rng);
    Tensor eps = random_tensor({3, 4, 4}, rng);
    EpsPredictor truth = [&](const Tensor&, int) { return eps; };

    Tensor z_T = add_noise(z0, 1000, eps, s);
    Tensor rec = ddim_trajectory(z_T, truth, 1, s);
    CHECK(max_abs_diff(rec, z0) < 1e-5);
}

TEST_CASE("ddim_sample is seed-deterministic and matches the zero-stub oracle") {
    ModelConfig cfg = tiny_cfg();
    Rng rng(411);
    DenoiserParams dp(cfg, rng);  // out conv zero-init => eps-hat is exactly 0
    EncoderParams ep(cfg, rng);
    NoiseSchedule sched(100);
    SamplerConfig sc;
    sc.ddim_steps = 10;
    sc.seed = 77;

    Tensor img = ddim_sample(null_prompt_ids(), {}, sc, sched, dp, ep, cfg);
    CHECK(img.channels() == 3);
    CHECK(img.height() == 8);
    for (std::size_t i = 0; i < img.numel(); ++i) {
        CHECK(img[i] >= 0.0);
        CHECK(img[i] <= 1.0);
    }
    CHECK(bit_equal(img, ddim_sample(null_prompt_ids(), {}, sc, sched, dp, ep, cfg)));

    // Independent oracle: replay z_T, telescope by 1/sqrt(abar_T), map to image.
    Rng replay(substream(sc.seed, Stream::sampler_init, 0, 0, 0));
    Tensor z({3, 8, 8});
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = replay.normal();
    const double scale = 1.0 / std::sqrt(sched.alpha_bar[100]);
    Tensor want(z.shape());
    for (std::size_t i = 0; i < z.numel(); ++i)
        want[i] = std::clamp((z[i] * scale + 1.0) / 2.0, 0.0, 1.0);
    CHECK(max_abs_diff(img, want) < 1e-6);

    SamplerConfig other = sc;
    other.seed = 78;
    CHECK(!bit_equal(img, ddim_sample(null_prompt_ids(), {}, other, sched, dp, ep, cfg)));

    SamplerConfig bad = sc;
    bad.ddim_steps = 101;
    CHECK_THROWS_AS((void)ddim_sample(null_prompt_ids(), {}, bad, sched, dp, ep, cfg),
                    std::invalid_argument);
}

TEST_CASE("ddim_sample with a real denoiser and a concept bundle stays deterministic") {
    ModelConfig cfg = tiny_cfg();
    Rng rng(412);
    DenoiserParams dp(cfg, rng);
    EncoderParams ep(cfg, rng);
    for (DenoiserParams::AttnBlock& ab : dp.attn)
        for (std::size_t i = 0; i < ab.wv_cpt.w.numel(); ++i) ab.wv_cpt.w[i] = rng.normal() * 0.3;
    for (std::size_t i = 0; i < dp.out_w.w.numel(); ++i) dp.out_w.w[i] = rng.normal() * 0.3;

    NoiseSchedule sched(60);
    SamplerConfig sc;
    sc.ddim_steps = 6;
    sc.seed = 5;

    ConceptBundle bundle(1);
    bundle[0].rep = random_rep(cfg, rng);
    std::array<int, kPromptLen> prompt = prompt_token_ids(make_scene({2}, 1, 0, 0));

    Tensor a = ddim_sample(prompt, bundle, sc, sched, dp, ep, cfg);
    Tensor b = ddim_sample(prompt, bundle, sc, sched, dp, ep, cfg);
    CHECK(bit_equal(a, b));

    // omega = 1 skips the unconditional pass but stays the conditional output.
    SamplerConfig w1 = sc;
    w1.omega = 1.0;
    Tensor c = ddim_sample(prompt, bundle, w1, sched, dp, ep, cfg);
    CHECK(c.height() == 8);
    CHECK(!bit_equal(a, c));
}

TEST_CASE("bundle validation: masks all-or-none, binary, right resolution") {
    ModelConfig cfg = tiny_cfg();
    Rng rng(413);
    ConceptBundle bundle(2);
    bundle[0].rep = random_rep(cfg, rng);
    bundle[1].rep = random_rep(cfg, rng);
    CHECK_NOTHROW(validate_bundle(bundle, cfg));

    bundle[0].mask = Tensor({8, 8});
    CHECK_THROWS_AS(validate_bundle(bundle, cfg), std::invalid_argument);  // one mask missing
    bundle[1].mask = Tensor({8, 8});
    CHECK_NOTHROW(validate_bundle(bundle, cfg));

    bundle[1].mask.at(0, 0) = 0.5;
    CHECK_THROWS_AS(validate_bundle(bundle, cfg), std::invalid_argument);  // non-binary
    bundle[1].mask = Tensor({4, 4});
    CHECK_THROWS_AS(validate_bundle(bundle, cfg), std::invalid_argument);  // wrong res

    ConceptBundle short_rep(1);
    short_rep[0].rep = random_rep(cfg, rng);
    short_rep[0].rep.per_block.pop_back();
    CHECK_THROWS_AS(validate_bundle(short_rep, cfg), std::invalid_argument);
}

TEST_CASE("combine_concepts: identity, concatenation, associativity, oracle") {
    ModelConfig cfg = tiny_cfg();
    Rng rng(414);
    ConceptRep a = random_rep(cfg, rng);
    ConceptRep b = random_rep(cfg, rng);
    ConceptRep c = random_rep(cfg, rng);

    ConceptRep one = combine_concepts({a});
    REQUIRE(one.per_block.size() == a.per_block.size());
    for (std::size_t i = 0; i < one.per_block.size(); ++i)
        CHECK(bit_equal(one.per_block[i], a.per_block[i]));
    CHECK(max_abs_diff(one.pooled, a.pooled) < 1e-12);

    ConceptRep two = combine_concepts({a, b});
    for (std::size_t i = 0; i < two.per_block.size(); ++i) {
        REQUIRE(two.per_block[i].rows() == 2 * cfg.n_q);
        for (int r = 0; r < cfg.n_q; ++r)
            for (int col = 0; col < cfg.d_u; ++col) {
                CHECK(two.per_block[i].at(r, col) == a.per_block[i].at(r, col));
                CHECK(two.per_block[i].at(cfg.n_q + r, col) == b.per_block[i].at(r, col));
            }
    }
    double norm = 0.0;
    for (int col = 0; col < cfg.d_u; ++col) norm += two.pooled.at(0, col) * two.pooled.at(0, col);
    CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-6);

    ConceptRep left = combine_concepts({combine_concepts({a, b}), c});
    ConceptRep right = combine_concepts({a, combine_concepts({b, c})});
    ConceptRep flat = combine_concepts({a, b, c});
    for (std::size_t i = 0; i < flat.per_block.size(); ++i) {
        CHECK(bit_equal(left.per_block[i], flat.per_block[i]));
        CHECK(bit_equal(right.per_block[i], flat.per_block[i]));
    }
    CHECK(bit_equal(left.pooled, flat.pooled));
    CHECK(bit_equal(right.pooled, flat.pooled));

    ConceptRep wrong = random_rep(cfg, rng);
    wrong.per_block.pop_back();
    CHECK_THROWS_AS((void)combine_concepts({a, wrong}), std::invalid_argument);

    // Adapter attention over combined tokens == brute force over concatenated keys.
    DenoiserParams dp(cfg, rng);
    for (DenoiserParams::AttnBlock& ab : dp.attn)
        for (std::size_t i = 0; i < ab.wv_cpt.w.numel(); ++i) ab.wv_cpt.w[i] = rng.normal() * 0.3;
    const DenoiserParams::AttnBlock& ab = dp.attn[0];
    Tensor h = random_tensor({6, ab.channels}, rng);
    Tensor prompt = random_tensor({4, cfg.d_txt}, rng);

    ad::Tape tape;
    const Tensor& got = tape.value(dual_cross_attention(
        tape, tape.input(h), tape.input(prompt), tape.input(two.per_block[0]), 1.0, ab));

    Tensor normed = ref::layernorm_rows(h, ab.ln_g.w, ab.ln_b.w, 1e-5);
    Tensor q = ref::matmul(normed, ab.wq.w);
    Tensor text = ref::attention(q, ref::matmul(prompt, ab.wk_txt.w),
                                 ref::matmul(prompt, ab.wv_txt.w));
    Tensor cpt = ref::attention(q, ref::matmul(two.per_block[0], ab.wk_cpt.w),
                                ref::matmul(two.per_block[0], ab.wv_cpt.w));
    Tensor want = h;
    for (std::size_t i = 0; i < want.numel(); ++i) want[i] += text[i] + cpt[i];
    CHECK(max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("masked_multi_concept_step: identity, annihilation, per-region equality") {
    ModelConfig cfg = tiny_cfg();
    Rng rng(415);
    DenoiserParams dp(cfg, rng);
    for (DenoiserParams::AttnBlock& ab : dp.attn) {
        for (std::size_t i = 0; i < ab.wv_cpt.w.numel(); ++i) ab.wv_cpt.w[i] = rng.normal() * 0.3;
        for (std::size_t i = 0; i < ab.wv_txt.w.numel(); ++i) ab.wv_txt.w[i] = rng.normal() * 0.3;
    }
    const DenoiserParams::AttnBlock& ab = dp.attn[0];
    const int side = 4, res = 8;
    Tensor h = random_tensor({side * side, ab.channels}, rng);
    Tensor prompt = random_tensor({4, cfg.d_txt}, rng);
    Tensor f1 = random_tensor({cfg.n_q, cfg.d_u}, rng);
    Tensor f2 = random_tensor({cfg.n_q, cfg.d_u}, rng);

    Tensor ones_mask({res, res}), zeros_mask({res, res}), left({res, res}), right({res, res});
    ones_mask.fill(1.0);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            left.at(y, x) = x < res / 2 ? 1.0 : 0.0;
            right.at(y, x) = 1.0 - left.at(y, x);
        }

    ad::Tape tape;
    ad::VarId hv = tape.input(h);
    ad::VarId pv = tape.input(prompt);
    ad::VarId f1v = tape.input(f1);
    ad::VarId f2v = tape.input(f2);

    ad::VarId unmasked = dual_cross_attention(tape, hv, pv, f1v, 1.0, ab);
    ad::VarId identity =
        masked_multi_concept_step(tape, hv, pv, {f1v}, {ones_mask}, 1.0, ab, side, res);
    CHECK(bit_equal(tape.value(identity), tape.value(unmasked)));

    ad::VarId text_only = dual_cross_attention(tape, hv, pv, f1v, 0.0, ab);
    ad::VarId annihilated =
        masked_multi_concept_step(tape, hv, pv, {f1v}, {zeros_mask}, 1.0, ab, side, res);
    CHECK(bit_equal(tape.value(annihilated), tape.value(text_only)));

    ad::VarId mixed = masked_multi_concept_step(tape, hv, pv, {f1v, f2v}, {left, right}, 1.0,
                                                ab, side, res);
    ad::VarId only1 = dual_cross_attention(tape, hv, pv, f1v, 1.0, ab);
    ad::VarId only2 = dual_cross_attention(tape, hv, pv, f2v, 1.0, ab);
    const Tensor& vm = tape.value(mixed);
    const Tensor& v1 = tape.value(only1);
    const Tensor& v2 = tape.value(only2);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < ab.channels; ++c) {
                const int r = y * side + x;
                const double want = x < side / 2 ? v1.at(r, c) : v2.at(r, c);
                CHECK(vm.at(r, c) == want);
            }

    CHECK_THROWS_AS((void)masked_multi_concept_step(tape, hv, pv, {f1v}, {Tensor({4, 4})}, 1.0,
                                                    ab, side, res),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)masked_multi_concept_step(tape, hv, pv, {f1v}, {ones_mask}, 1.0, ab,
                                                    3, res),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)masked_multi_concept_step(tape, hv, pv, {f1v, f2v}, {ones_mask}, 1.0,
                                                    ab, side, res),
                    std::invalid_argument);
}
