#include "disen/trainloop.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace disen {

namespace {

Tensor draw_normals(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

}  // namespace

void TrainConfig::validate() const {
    if (warmup_steps < 0 || main_steps < 0 || total_steps() <= 0)
        throw std::invalid_argument("train config: step counts must be >= 0 and total > 0");
    if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be positive");
    if (timesteps < 1) throw std::invalid_argument("train config: timesteps must be >= 1");
    if (!(lr_a > 0.0) || !(lr_b > 0.0) || !std::isfinite(lr_a) || !std::isfinite(lr_b))
        throw std::invalid_argument("train config: learning rates must be positive and finite");
    LossWeights{lambda, variant}.validate();
    if (!std::isfinite(mu_train)) throw std::invalid_argument("train config: mu_train must be finite");
    if (!(cond_dropout >= 0.0 && cond_dropout <= 1.0))
        throw std::invalid_argument("train config: cond_dropout must lie in [0,1]");
    if (checkpoint_interval <= 0)
        throw std::invalid_argument("train config: checkpoint_interval must be positive");
}

ModelParams::ModelParams(const ModelConfig& c, std::uint64_t seed)
    : cfg(c),
      enc([&] { Rng r = substream(seed, Stream::param_init, 0); return EncoderParams(c, r); }()),
      ext([&] { Rng r = substream(seed, Stream::param_init, 1); return ExtractorParams(c, r); }()),
      den([&] { Rng r = substream(seed, Stream::param_init, 2); return DenoiserParams(c, r); }()) {
    cfg.validate();
    enc.register_params(reg);
    ext.register_params(reg);
    den.register_params(reg);
}

void adamw_step(ad::ParamRegistry& reg, const std::vector<Tensor>& grads,
                const std::vector<double>& lr, OptState& st, const OptConfig& oc) {
    if (grads.size() != reg.size() || lr.size() != reg.size() || st.m.size() != reg.size())
        throw std::invalid_argument("adamw_step: buffer count mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(oc.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(oc.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < reg.size(); ++i) {
        Tensor& w = reg.at(static_cast<int>(i)).w;
        const Tensor& g = grads[i];
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        for (std::size_t k = 0; k < w.numel(); ++k) {
            m[k] = oc.beta1 * m[k] + (1.0 - oc.beta1) * g[k];
            v[k] = oc.beta2 * v[k] + (1.0 - oc.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            w[k] -= lr[i] * (m_hat / (std::sqrt(v_hat) + oc.eps) + oc.weight_decay * w[k]);
        }
    }
}

std::vector<double> learning_rates(const ModelParams& mp, const TrainConfig& tc) {
    std::vector<double> lr(mp.reg.size(), tc.lr_a);
    for (int id : mp.den.adapter_param_ids()) lr[static_cast<std::size_t>(id)] = tc.lr_b;
    return lr;
}

StepMetrics accumulate_gradients(const std::vector<const PairedSample*>& batch, ModelParams& mp,
                                 const TrainConfig& tc, const NoiseSchedule& sched,
                                 std::int64_t step, bool warmup, std::vector<Tensor>& grads) {
    if (batch.empty()) throw std::invalid_argument("accumulate_gradients: empty batch");
    if (grads.size() != mp.reg.size())
        throw std::invalid_argument("accumulate_gradients: gradient buffer count mismatch");

    const ModelConfig& cfg = mp.cfg;
    const int T = sched.T;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    StepMetrics out;
    out.step = step;
    out.warmup = warmup;

    for (std::size_t slot = 0; slot < batch.size(); ++slot) {
        const PairedSample& s = *batch[slot];
        Rng tdraw = substream(tc.seed, Stream::timestep, static_cast<std::uint64_t>(step), slot);
        Rng ndraw = substream(tc.seed, Stream::noise_eps, static_cast<std::uint64_t>(step), slot);
        Rng ddraw = substream(tc.seed, Stream::cond_dropout, static_cast<std::uint64_t>(step), slot);

        ad::Tape tape;
        ad::VarId feats_ref = encode_image(tape, s.ref_image, mp.enc, cfg);
        ad::VarId guid = encode_guidance(tape, s.guidance, mp.enc);
        ConceptRepVars f_cpt = extract(tape, feats_ref, guid, QueryKind::main, mp.ext, cfg);

        // Branch A: reconstruct the target from its masked prompt + f_cpt.
        const int t_a = 1 + tdraw.below_int(T);
        Tensor eps_a = draw_normals({3, cfg.resolution, cfg.resolution}, ndraw);
        Tensor z_ta = add_noise(image_to_latent(s.tar_image), t_a, eps_a, sched);
        const bool drop_a = ddraw.bernoulli(tc.cond_dropout);
        const std::array<int, kPromptLen> ids_a =
            drop_a ? null_prompt_ids() : mask_prompt_axis(prompt_token_ids(s.tar_scene), s.shared_kind);
        ad::VarId ct_a = encode_prompt_ids(tape, ids_a, mp.enc);
        std::vector<ConceptStream> cond_a;
        cond_a.push_back(drop_a ? zero_concept_stream(tape, cfg)
                                : ConceptStream{f_cpt.per_block, Tensor()});
        ad::VarId eps_hat_a = predict_noise(tape, tape.input(std::move(z_ta)), t_a, T, ct_a, cond_a,
                                            tc.mu_train, mp.den, cfg);
        ad::VarId loss_a = tape.mse(eps_hat_a, tape.input(std::move(eps_a)));

        ad::VarId total = loss_a;
        double loss_b_val = 0.0, con_val = 0.0;
        if (!warmup) {
            // Branch B: reconstruct the reference from its masked prompt +
            // [anti(ref), main(tar)].
            ConceptRepVars f_a = extract(tape, feats_ref, guid, QueryKind::anti, mp.ext, cfg);
            ad::VarId feats_tar = encode_image(tape, s.tar_image, mp.enc, cfg);
            ConceptRepVars f_tar = extract(tape, feats_tar, guid, QueryKind::main, mp.ext, cfg);

            const int t_b = 1 + tdraw.below_int(T);
            Tensor eps_b = draw_normals({3, cfg.resolution, cfg.resolution}, ndraw);
            Tensor z_tb = add_noise(image_to_latent(s.ref_image), t_b, eps_b, sched);
            const bool drop_b = ddraw.bernoulli(tc.cond_dropout);
            const std::array<int, kPromptLen> ids_b =
                drop_b ? null_prompt_ids()
                       : mask_prompt_axis(prompt_token_ids(s.ref_scene), s.shared_kind);
            ad::VarId ct_b = encode_prompt_ids(tape, ids_b, mp.enc);
            std::vector<ConceptStream> cond_b;
            if (drop_b) {
                cond_b.push_back(zero_concept_stream(tape, cfg));
            } else {
                std::vector<ad::VarId> comb(f_a.per_block.size());
                for (std::size_t n = 0; n < comb.size(); ++n)
                    comb[n] = tape.concat_rows(f_a.per_block[n], f_tar.per_block[n]);
                cond_b.push_back(ConceptStream{std::move(comb), Tensor()});
            }
            ad::VarId eps_hat_b = predict_noise(tape, tape.input(std::move(z_tb)), t_b, T, ct_b,
                                                cond_b, tc.mu_train, mp.den, cfg);
            ad::VarId loss_b = tape.mse(eps_hat_b, tape.input(std::move(eps_b)));
            loss_b_val = tape.value(loss_b).item();

            ad::VarId half = tape.scale(tape.add(loss_a, loss_b), 0.5);
            const LossWeights weights{tc.lambda, tc.variant};
            if (tc.variant == ContrastiveVariant::None) {
                total = half;
            } else {
                ad::VarId con = tc.variant == ContrastiveVariant::COD
                                    ? cod_loss(tape, f_cpt.pooled, f_a.pooled, f_tar.pooled)
                                    : cd_loss(tape, f_cpt.pooled, f_a.pooled, f_tar.pooled);
                con_val = tape.value(con).item();
                total = total_loss(tape, half, con, weights);
            }
        }

        const double loss_a_val = tape.value(loss_a).item();
        const double total_val = tape.value(total).item();
        if (!std::isfinite(total_val))
            throw std::runtime_error(
                "train_step: non-finite loss at step " + std::to_string(step) + " slot " +
                std::to_string(slot) + " (sample seed " + std::to_string(s.seed) +
                "): loss_a=" + std::to_string(loss_a_val) + " loss_b=" + std::to_string(loss_b_val) +
                " contrastive=" + std::to_string(con_val));

        tape.backward(tape.scale(total, inv_batch));
        tape.add_param_grads(grads);

        out.loss_a += loss_a_val * inv_batch;
        out.loss_b += loss_b_val * inv_batch;
        out.contrastive += con_val * inv_batch;
        out.total += total_val * inv_batch;
    }
    return out;
}

StepMetrics train_step(const std::vector<const PairedSample*>& batch, ModelParams& mp,
                       const TrainConfig& tc, const NoiseSchedule& sched, std::int64_t step,
                       bool warmup, OptState& opt) {
    std::vector<Tensor> grads = mp.reg.make_buffers();
    StepMetrics metrics = accumulate_gradients(batch, mp, tc, sched, step, warmup, grads);
    adamw_step(mp.reg, grads, learning_rates(mp, tc), opt, OptConfig{});
    return metrics;
}

// --- checkpoints -----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'I', 'S', 'E', 'N', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Cursor {
    const char* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > size)
            throw std::runtime_error("load_checkpoint: truncated file: expected at least " +
                                     std::to_string(pos + n) + " bytes, got " +
                                     std::to_string(size));
    }
    template <typename T>
    T read_pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    void read_doubles(double* out, std::size_t count) {
        need(count * sizeof(double));
        std::memcpy(out, data + pos, count * sizeof(double));
        pos += count * sizeof(double);
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& mp, const OptState& opt,
                     std::int64_t step, std::uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kCheckpointVersion);
    write_pod(os, config_hash);
    write_pod(os, step);
    write_pod(os, opt.t);
    write_pod(os, static_cast<std::uint32_t>(mp.reg.size()));
    for (std::size_t i = 0; i < mp.reg.size(); ++i) {
        const Tensor& w = mp.reg.at(static_cast<int>(i)).w;
        write_pod(os, static_cast<std::uint32_t>(w.shape().size()));
        for (int d : w.shape()) write_pod(os, static_cast<std::int32_t>(d));
        os.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.numel() * sizeof(double)));
    }
    for (const std::vector<Tensor>* moments : {&opt.m, &opt.v})
        for (const Tensor& t : *moments)
            os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!os.good()) throw std::runtime_error("save_checkpoint: write failure on " + path);
}

CheckpointInfo load_checkpoint(const std::string& path, ModelParams& mp, OptState& opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    Cursor c{bytes.data(), bytes.size()};

    c.need(sizeof(kMagic));
    if (std::memcmp(c.data, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
    c.pos += sizeof(kMagic);

    const auto version = c.read_pod<std::uint32_t>();
    if (version > kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: format version " + std::to_string(version) +
                                 " is newer than supported version " +
                                 std::to_string(kCheckpointVersion));
    CheckpointInfo info;
    info.config_hash = c.read_pod<std::uint64_t>();
    info.step = c.read_pod<std::int64_t>();
    const auto opt_t = c.read_pod<std::int64_t>();

    const auto n_params = c.read_pod<std::uint32_t>();
    if (n_params != mp.reg.size())
        throw std::runtime_error("load_checkpoint: file has " + std::to_string(n_params) +
                                 " parameters, model expects " + std::to_string(mp.reg.size()));
    for (std::size_t i = 0; i < mp.reg.size(); ++i) {
        Tensor& w = mp.reg.at(static_cast<int>(i)).w;
        const auto ndims = c.read_pod<std::uint32_t>();
        std::vector<int> dims(ndims);
        for (auto& d : dims) d = c.read_pod<std::int32_t>();
        if (dims != w.shape())
            throw std::runtime_error("load_checkpoint: parameter " + std::to_string(i) +
                                     " shape mismatch");
        c.read_doubles(w.data(), w.numel());
    }
    if (opt.m.size() != mp.reg.size() || opt.v.size() != mp.reg.size())
        throw std::invalid_argument("load_checkpoint: optimizer state buffer count mismatch");
    for (std::vector<Tensor>* moments : {&opt.m, &opt.v})
        for (Tensor& t : *moments) c.read_doubles(t.data(), t.numel());
    if (c.pos != c.size)
        throw std::runtime_error("load_checkpoint: " + std::to_string(c.size - c.pos) +
                                 " trailing bytes after checkpoint payload");
    opt.t = opt_t;
    return info;
}

// --- full runs ----------------------------------------------------------------------

RunResult run(const TrainConfig& tc, const ModelConfig& mc, const Dataset& data,
              const std::string& out_dir, std::uint64_t config_hash,
              const std::string& resume_checkpoint, std::ostream* log) {
    namespace fs = std::filesystem;
    tc.validate();
    mc.validate();
    if (data.samples.empty()) throw std::runtime_error("run: dataset is empty");
    if (data.resolution != mc.resolution)
        throw std::runtime_error("run: dataset resolution " + std::to_string(data.resolution) +
                                 " does not match model resolution " +
                                 std::to_string(mc.resolution));
    fs::create_directories(out_dir);

    ModelParams mp(mc, tc.seed);
    OptState opt(mp.reg);
    std::int64_t start_step = 0;
    if (!resume_checkpoint.empty()) {
        const CheckpointInfo info = load_checkpoint(resume_checkpoint, mp, opt);
        start_step = info.step;
        if (log && config_hash != 0 && info.config_hash != config_hash)
            *log << "warning: resuming from a checkpoint with config hash " << info.config_hash
                 << " under current config hash " << config_hash << "\n";
    }

    std::ofstream metrics_file(fs::path(out_dir) / "metrics.jsonl", std::ios::app);
    if (!metrics_file)
        throw std::runtime_error("run: cannot open metrics log in " + out_dir);

    const NoiseSchedule sched(tc.timesteps);
    const std::int64_t total = tc.total_steps();
    RunResult result;
    result.final_step = total;
    result.checkpoint_path = resume_checkpoint;

    for (std::int64_t step = start_step + 1; step <= total; ++step) {
        const bool warm = step <= tc.warmup_steps;
        Rng bdraw = substream(tc.seed, Stream::batch_indices, static_cast<std::uint64_t>(step));
        std::vector<const PairedSample*> batch;
        batch.reserve(static_cast<std::size_t>(tc.batch_size));
        for (int b = 0; b < tc.batch_size; ++b)
            batch.push_back(&data.samples[bdraw.below(data.samples.size())]);

        const StepMetrics m = train_step(batch, mp, tc, sched, step, warm, opt);
        metrics_file << nlohmann::json{{"step", m.step},
                                       {"stage", warm ? "warmup" : "main"},
                                       {"loss_a", m.loss_a},
                                       {"loss_b", m.loss_b},
                                       {"cod", m.contrastive},
                                       {"total", m.total}}
                            .dump()
                     << "\n";
        metrics_file.flush();
        if (!metrics_file.good()) throw std::runtime_error("run: metrics write failure");
        result.metrics.push_back(m);

        if (step % tc.checkpoint_interval == 0 || step == total) {
            const std::string path = (fs::path(out_dir) / ("ckpt_" + std::to_string(step) + ".bin")).string();
            save_checkpoint(path, mp, opt, step, config_hash);
            result.checkpoint_path = path;
        }
        if (log && (step % 25 == 0 || step == total))
            *log << "step " << step << "/" << total << (warm ? " [warmup]" : " [main]")
                 << " total=" << m.total << " loss_a=" << m.loss_a << " loss_b=" << m.loss_b
                 << " cod=" << m.contrastive << "\n";
    }
    return result;
}

}  // namespace disen
