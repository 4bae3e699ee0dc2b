// disen: single command-line entry point for the pipeline. Subcommands cover
// data generation, training, sampling, multi-concept combination, evaluation,
// sweeps, attention inspection, and the finite-difference self-test. Exit
// codes: 0 success, 1 validation error (bad flags/config/arguments), 2
// runtime failure. Logs go to stderr; machine-readable outputs to files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "disen/config.hpp"
#include "disen/diffusion.hpp"
#include "disen/encode.hpp"
#include "disen/evalsuite.hpp"
#include "disen/extractor.hpp"
#include "disen/gradcheck.hpp"
#include "disen/png_io.hpp"
#include "disen/procgen.hpp"
#include "disen/trainloop.hpp"

namespace {

using namespace disen;

// Options shared by every subcommand: JSON config, seed override, and the
// resolved-config dump (which is itself a valid --config input).
struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool dump = false;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "seed override")->each([this](const std::string&) {
            seed_set = true;
        });
        sub->add_flag("--dump-config", dump, "print the resolved config and exit");
    }

    // Loads the config, applies the seed override, validates; returns true if
    // the subcommand should stop after dumping.
    bool resolve(GlobalConfig& gc) const {
        if (!config_path.empty()) gc = load_config(config_path);
        if (seed_set) gc.seed = seed;
        gc.validate();
        if (dump) std::cout << gc.dump() << "\n";
        return dump;
    }
};

ModelParams* g_params = nullptr;  // single live model per invocation

// Builds the model for `gc`, loading `ckpt` when given (with a config-hash
// warning on mismatch), fresh seed-derived weights otherwise.
ModelParams& make_model(const GlobalConfig& gc, const std::string& ckpt) {
    static std::optional<ModelParams> slot;
    slot.emplace(gc.model_config(), gc.seed);
    g_params = &*slot;
    OptState opt(slot->reg);
    if (!ckpt.empty()) {
        const CheckpointInfo info = load_checkpoint(ckpt, *slot, opt);
        if (info.config_hash != config_hash(gc))
            std::cerr << "warning: checkpoint config hash " << info.config_hash
                      << " != resolved config hash " << config_hash(gc) << "\n";
        std::cerr << "loaded " << ckpt << " (step " << info.step << ")\n";
    } else {
        std::cerr << "note: no checkpoint given; using fresh seed-" << gc.seed << " weights\n";
    }
    return *slot;
}

Dataset dataset_for(const GlobalConfig& gc) {
    if (!gc.train.dataset_dir.empty()) {
        std::cerr << "reading dataset from " << gc.train.dataset_dir << "\n";
        return read_manifest(gc.train.dataset_dir);
    }
    std::cerr << "rendering in-memory dataset: " << gc.pairs_per_kind << " pairs/kind at "
              << gc.resolution << "x" << gc.resolution << "\n";
    return make_dataset(gc.seed, gc.pairs_per_kind, gc.resolution);
}

// Extracts the main-query concept of `kind` from the pair rendered by
// `ref_seed`, at the model's resolution.
struct RefConcept {
    PairedSample pair;
    ConceptRep rep;
};

RefConcept ref_concept(const ModelParams& mp, std::uint64_t ref_seed, ConceptKind kind) {
    RefConcept rc;
    rc.pair = render_pair(ref_seed, kind, mp.cfg.resolution);
    rc.rep = extract_rep(rc.pair.ref_image, rc.pair.guidance, QueryKind::main, mp.enc, mp.ext,
                         mp.cfg);
    return rc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path);
}

// --- eval helpers -------------------------------------------------------------

// Top-2 principal axes of the centered pooled reps by deterministic power
// iteration with deflation; returns one CSV row per sample: kind,x,y.
std::string principal_axes_csv(const std::vector<Tensor>& reps,
                               const std::vector<ConceptKind>& kinds) {
    const int n = static_cast<int>(reps.size());
    const int d = static_cast<int>(reps[0].numel());
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    for (const Tensor& r : reps)
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)] / n;
    std::vector<std::vector<double>> x(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(d)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                reps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                mean[static_cast<std::size_t>(j)];

    auto matvec = [&](const std::vector<double>& v) {
        // (XᵀX) v without forming the covariance
        std::vector<double> xv(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                xv[static_cast<std::size_t>(i)] +=
                    x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                    v[static_cast<std::size_t>(j)];
        std::vector<double> out(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(j)] +=
                    x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                    xv[static_cast<std::size_t>(i)];
        return out;
    };
    auto normalize = [&](std::vector<double>& v) {
        double nrm = 0.0;
        for (double e : v) nrm += e * e;
        nrm = std::sqrt(nrm);
        if (nrm > 0) for (double& e : v) e /= nrm;
    };

    std::vector<std::vector<double>> axes;
    for (int a = 0; a < 2; ++a) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            v[static_cast<std::size_t>(j)] = std::cos(0.7 * (j + 1) * (a + 1));  // fixed start
        for (int it = 0; it < 100; ++it) {
            v = matvec(v);
            for (const std::vector<double>& prev : axes) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j)
                    dot += v[static_cast<std::size_t>(j)] * prev[static_cast<std::size_t>(j)];
                for (int j = 0; j < d; ++j)
                    v[static_cast<std::size_t>(j)] -= dot * prev[static_cast<std::size_t>(j)];
            }
            normalize(v);
        }
        axes.push_back(v);
    }

    std::string csv = "kind,x,y\n";
    for (int i = 0; i < n; ++i) {
        double px = 0.0, py = 0.0;
        for (int j = 0; j < d; ++j) {
            px += x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                  axes[0][static_cast<std::size_t>(j)];
            py += x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                  axes[1][static_cast<std::size_t>(j)];
        }
        csv += std::string(kind_name(kinds[static_cast<std::size_t>(i)])) + "," +
               nlohmann::json(px).dump() + "," + nlohmann::json(py).dump() + "\n";
    }
    return csv;
}

// --- inspect-attn helper --------------------------------------------------------

// One grayscale tile per attention row (patch grid upscaled to image size),
// tiled horizontally with a 2px white separator.
Tensor attention_heatmap(const Tensor& map, int resolution, int patch_size) {
    const int rows = map.rows();
    const int grid = resolution / patch_size;
    if (grid * grid != map.cols())
        throw std::runtime_error("attention map size does not match the patch grid");
    const int sep = 2;
    const int width = rows * resolution + (rows - 1) * sep;
    Tensor img({3, resolution, width});
    img.fill(1.0);
    for (int r = 0; r < rows; ++r) {
        double mx = 0.0;
        for (int c = 0; c < map.cols(); ++c) mx = std::max(mx, map.at(r, c));
        const int x0 = r * (resolution + sep);
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) {
                const int p = (y / patch_size) * grid + x / patch_size;
                const double v = mx > 0 ? map.at(r, p) / mx : 0.0;
                for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x0 + x) = v;
            }
    }
    return img;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"language-guided visual-concept disentanglement pipeline"};
    app.require_subcommand(1);

    // --- gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "render a paired dataset to a manifest directory");
    Common gen_c;
    gen_c.attach(gen);
    std::string gen_out;
    int gen_count = -1, gen_res = -1;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "pairs per kind (default from config)");
    gen->add_option("--resolution", gen_res, "image resolution (default from config)");
    gen->callback([&] {
        GlobalConfig gc;
        if (gen_c.resolve(gc)) return;
        const int count = gen_count > 0 ? gen_count : gc.pairs_per_kind;
        const int res = gen_res > 0 ? gen_res : gc.resolution;
        const Dataset d = make_dataset(gc.seed, count, res);
        write_manifest(d.samples, d.resolution, gen_out);
        std::cerr << "wrote " << d.samples.size() << " pairs to " << gen_out << "\n";
    });

    // --- train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "run the warmup + main training stages");
    Common train_c;
    train_c.attach(train);
    std::string train_out, train_resume, train_variant, train_data;
    int train_steps = -1, train_warmup = -1;
    double train_lambda = -1.0;
    train->add_option("--out", train_out, "run directory (metrics + checkpoints)")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    train->add_option("--steps", train_steps, "main-stage steps override");
    train->add_option("--warmup", train_warmup, "warmup-stage steps override");
    train->add_option("--lambda", train_lambda, "contrastive weight override");
    train->add_option("--variant", train_variant, "contrastive variant: cod, cd, or none");
    train->add_option("--dataset", train_data, "dataset directory (default: render in memory)");
    train->callback([&] {
        GlobalConfig gc;
        if (!train_variant.empty()) gc.train.variant = variant_from_name(train_variant);
        if (train_c.resolve(gc)) return;
        if (train_steps > 0) gc.train.main_steps = train_steps;
        if (train_warmup > 0) gc.train.warmup_steps = train_warmup;
        if (train_lambda >= 0) gc.train.lambda = train_lambda;
        if (!train_variant.empty()) gc.train.variant = variant_from_name(train_variant);
        if (!train_data.empty()) gc.train.dataset_dir = train_data;
        gc.validate();
        const Dataset data = dataset_for(gc);
        std::filesystem::create_directories(train_out);
        write_text(train_out + "/config.json", gc.dump() + "\n");
        const RunResult res = run(gc.train_config(), gc.model_config(), data, train_out,
                                  config_hash(gc), train_resume, &std::cerr);
        std::cerr << "final step " << res.final_step << ", checkpoint " << res.checkpoint_path
                  << "\n";
    });

    // --- sample -------------------------------------------------------------------
    auto* sample = app.add_subcommand("sample",
                                      "generate one image from a reference concept");
    Common sample_c;
    sample_c.attach(sample);
    std::string sample_ckpt, sample_kind = "content", sample_out;
    std::uint64_t sample_ref = 1;
    double sample_mu = -1.0, sample_omega = -1.0;
    int sample_ddim = -1;
    sample->add_option("--checkpoint", sample_ckpt, "trained checkpoint (default: fresh weights)");
    sample->add_option("--ref-seed", sample_ref, "seed of the rendered reference pair");
    sample->add_option("--kind", sample_kind, "concept kind: content, style, or composition");
    sample->add_option("--out", sample_out, "output PNG")->required();
    sample->add_option("--mu", sample_mu, "concept-attention weight override");
    sample->add_option("--omega", sample_omega, "classifier-free guidance weight override");
    sample->add_option("--ddim-steps", sample_ddim, "DDIM step count override");
    sample->callback([&] {
        GlobalConfig gc;
        if (sample_c.resolve(gc)) return;
        const ConceptKind kind = kind_from_name(sample_kind);
        ModelParams& mp = make_model(gc, sample_ckpt);
        const NoiseSchedule sched(gc.timesteps);
        SamplerConfig sc = gc.sampler_config();
        if (sample_mu >= 0) sc.mu = sample_mu;
        if (sample_omega >= 0) sc.omega = sample_omega;
        if (sample_ddim > 0) sc.ddim_steps = sample_ddim;
        sc.validate(sched.T);
        const RefConcept rc = ref_concept(mp, sample_ref, kind);
        const std::array<int, kPromptLen> prompt =
            mask_prompt_axis(prompt_token_ids(rc.pair.tar_scene), kind);
        const ConceptBundle bundle = {MaskedConcept{rc.rep, Tensor()}};
        const Tensor img = ddim_sample(prompt, bundle, sc, sched, mp.den, mp.enc, mp.cfg);
        write_png(sample_out, img);
        std::cerr << "wrote " << sample_out << "\n";
    });

    // --- combine --------------------------------------------------------------------
    auto* combine = app.add_subcommand("combine",
                                       "generate from two concepts out of two references");
    Common combine_c;
    combine_c.attach(combine);
    std::string comb_ckpt, comb_kind_a = "content", comb_kind_b = "style", comb_out;
    std::string comb_split = "none";
    std::uint64_t comb_ref_a = 1, comb_ref_b = 2;
    double comb_mu = -1.0, comb_omega = -1.0;
    int comb_ddim = -1;
    combine->add_option("--checkpoint", comb_ckpt, "trained checkpoint (default: fresh weights)");
    combine->add_option("--ref-seed-a", comb_ref_a, "reference pair seed for concept A");
    combine->add_option("--ref-seed-b", comb_ref_b, "reference pair seed for concept B");
    combine->add_option("--kind-a", comb_kind_a, "concept kind extracted from reference A");
    combine->add_option("--kind-b", comb_kind_b, "concept kind extracted from reference B");
    combine->add_option("--split", comb_split,
                        "spatial masks: none (token concat), h (left/right halves)");
    combine->add_option("--out", comb_out, "output PNG")->required();
    combine->add_option("--mu", comb_mu, "concept-attention weight override");
    combine->add_option("--omega", comb_omega, "classifier-free guidance weight override");
    combine->add_option("--ddim-steps", comb_ddim, "DDIM step count override");
    combine->callback([&] {
        GlobalConfig gc;
        if (combine_c.resolve(gc)) return;
        const ConceptKind kind_a = kind_from_name(comb_kind_a);
        const ConceptKind kind_b = kind_from_name(comb_kind_b);
        ModelParams& mp = make_model(gc, comb_ckpt);
        const NoiseSchedule sched(gc.timesteps);
        SamplerConfig sc = gc.sampler_config();
        if (comb_mu >= 0) sc.mu = comb_mu;
        if (comb_omega >= 0) sc.omega = comb_omega;
        if (comb_ddim > 0) sc.ddim_steps = comb_ddim;
        sc.validate(sched.T);
        const RefConcept a = ref_concept(mp, comb_ref_a, kind_a);
        const RefConcept b = ref_concept(mp, comb_ref_b, kind_b);
        const std::array<int, kPromptLen> prompt = mask_prompt_axis(
            mask_prompt_axis(prompt_token_ids(a.pair.tar_scene), kind_a), kind_b);

        ConceptBundle bundle;
        if (comb_split == "none") {
            bundle = {MaskedConcept{combine_concepts({a.rep, b.rep}), Tensor()}};
        } else if (comb_split == "h") {
            const int res = mp.cfg.resolution;
            Tensor left({res, res}), right({res, res});
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    left.at(y, x) = x < res / 2 ? 1.0 : 0.0;
                    right.at(y, x) = 1.0 - left.at(y, x);
                }
            bundle = {MaskedConcept{a.rep, left}, MaskedConcept{b.rep, right}};
        } else {
            throw std::invalid_argument("--split must be none or h, got '" + comb_split + "'");
        }
        const Tensor img = ddim_sample(prompt, bundle, sc, sched, mp.den, mp.enc, mp.cfg);
        write_png(comb_out, img);
        std::cerr << "wrote " << comb_out << "\n";
    });

    // --- eval ---------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "orthogonality report and optional concept probes");
    Common eval_c;
    eval_c.attach(eval);
    std::string eval_ckpt, eval_report, eval_axes;
    int eval_per_kind = 40, eval_trials = 0, eval_ddim = -1;
    std::uint64_t eval_set_seed = 777;
    eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint (default: fresh weights)");
    eval->add_option("--report", eval_report, "output JSON report")->required();
    eval->add_option("--per-kind", eval_per_kind, "evaluation samples per kind");
    eval->add_option("--eval-seed", eval_set_seed, "seed of the rendered evaluation set");
    eval->add_option("--trials", eval_trials, "generation probe trials per kind (0 = skip)");
    eval->add_option("--ddim-steps", eval_ddim, "DDIM step count override for probes");
    eval->add_option("--axes", eval_axes, "optional 2-D principal-axes CSV for plotting");
    eval->callback([&] {
        GlobalConfig gc;
        if (eval_c.resolve(gc)) return;
        ModelParams& mp = make_model(gc, eval_ckpt);
        const std::vector<PairedSample> eval_set =
            make_eval_set(eval_set_seed, eval_per_kind, mp.cfg.resolution);
        std::vector<Tensor> reps;
        std::vector<ConceptKind> kinds;
        const OrthogonalityReport rep = orthogonality_report(
            eval_set,
            [&](const PairedSample& s) {
                Tensor r = pooled_rep(s, mp.enc, mp.ext, mp.cfg);
                reps.push_back(r);
                kinds.push_back(s.shared_kind);
                return r;
            },
            std::min(30, eval_per_kind));
        std::cerr << "inter-kind mean |cos| = " << rep.inter_mean_abs()
                  << ", intra-kind mean cos = " << rep.intra_mean_cos() << "\n";

        nlohmann::json doc;
        doc["orthogonality"] = nlohmann::json::parse(rep.to_json());
        if (eval_trials > 0) {
            const NoiseSchedule sched(gc.timesteps);
            SamplerConfig sc = gc.sampler_config();
            if (eval_ddim > 0) sc.ddim_steps = eval_ddim;
            for (ConceptKind k :
                 {ConceptKind::Content, ConceptKind::Style, ConceptKind::Composition}) {
                const ProbeReport pr = probe_eval(mp, k, eval_trials, sc, sched);
                doc["probes"][kind_name(k)] = nlohmann::json::parse(pr.to_json());
                std::cerr << "probe " << kind_name(k) << ": " << pr.matches << "/" << pr.trials
                          << " = " << pr.accuracy << "\n";
            }
        }
        write_text(eval_report, doc.dump(2) + "\n");
        std::cerr << "wrote " << eval_report << "\n";
        if (!eval_axes.empty()) {
            write_text(eval_axes, principal_axes_csv(reps, kinds));
            std::cerr << "wrote " << eval_axes << "\n";
        }
    });

    // --- sweep ----------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "probe accuracy across mu or omega values");
    Common sweep_c;
    sweep_c.attach(sweep_cmd);
    std::string sweep_ckpt, sweep_param = "mu", sweep_kind = "content", sweep_out;
    std::vector<double> sweep_values;
    int sweep_trials = 60, sweep_ddim = -1;
    sweep_cmd->add_option("--checkpoint", sweep_ckpt, "trained checkpoint (default: fresh weights)");
    sweep_cmd->add_option("--param", sweep_param, "swept parameter: mu or omega");
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--kind", sweep_kind, "probed concept kind");
    sweep_cmd->add_option("--trials", sweep_trials, "probe trials per value");
    sweep_cmd->add_option("--ddim-steps", sweep_ddim, "DDIM step count override");
    sweep_cmd->add_option("--out", sweep_out, "output CSV")->required();
    sweep_cmd->callback([&] {
        GlobalConfig gc;
        if (sweep_c.resolve(gc)) return;
        const SweepParam param = sweep_param_from_name(sweep_param);
        const ConceptKind kind = kind_from_name(sweep_kind);
        ModelParams& mp = make_model(gc, sweep_ckpt);
        const NoiseSchedule sched(gc.timesteps);
        SamplerConfig sc = gc.sampler_config();
        if (sweep_ddim > 0) sc.ddim_steps = sweep_ddim;
        const std::vector<ProbeReport> reports =
            sweep(mp, param, sweep_values, kind, sweep_trials, sc, sched);
        write_text(sweep_out, sweep_csv(param, sweep_values, reports));
        for (std::size_t i = 0; i < reports.size(); ++i)
            std::cerr << sweep_param << "=" << sweep_values[i] << ": accuracy "
                      << reports[i].accuracy << "\n";
        std::cerr << "wrote " << sweep_out << "\n";
    });

    // --- inspect-attn ------------------------------------------------------------------
    auto* attn = app.add_subcommand("inspect-attn",
                                    "export extractor attention maps as a PNG heatmap");
    Common attn_c;
    attn_c.attach(attn);
    std::string attn_ckpt, attn_kind = "content", attn_out, attn_query = "main";
    std::uint64_t attn_ref = 1;
    int attn_block = 1, attn_layer = 1;
    attn->add_option("--checkpoint", attn_ckpt, "trained checkpoint (default: fresh weights)");
    attn->add_option("--ref-seed", attn_ref, "seed of the rendered reference pair");
    attn->add_option("--kind", attn_kind, "guidance kind");
    attn->add_option("--query", attn_query, "query set: main or anti");
    attn->add_option("--block", attn_block, "denoiser block index (1-based)");
    attn->add_option("--layer", attn_layer, "extractor layer (1-based)");
    attn->add_option("--out", attn_out, "output PNG")->required();
    attn->callback([&] {
        GlobalConfig gc;
        if (attn_c.resolve(gc)) return;
        const ConceptKind kind = kind_from_name(attn_kind);
        QueryKind which;
        if (attn_query == "main") which = QueryKind::main;
        else if (attn_query == "anti") which = QueryKind::anti;
        else throw std::invalid_argument("--query must be main or anti, got '" + attn_query + "'");
        ModelParams& mp = make_model(gc, attn_ckpt);
        const PairedSample s = render_pair(attn_ref, kind, mp.cfg.resolution);
        const Tensor map = attention_map(s.ref_image, s.guidance, which, attn_block, attn_layer,
                                         mp.enc, mp.ext, mp.cfg);
        write_png(attn_out, attention_heatmap(map, mp.cfg.resolution, mp.cfg.patch_size));
        std::cerr << "wrote " << attn_out << " (" << map.rows() << " rows x " << map.cols()
                  << " patches)\n";
    });

    // --- grad-check -----------------------------------------------------------------
    auto* gch = app.add_subcommand("grad-check", "finite-difference gradient self-test");
    Common gch_c;
    gch_c.attach(gch);
    gch->callback([&] {
        GlobalConfig gc;
        if (gch_c.resolve(gc)) return;
        const std::vector<GradCheckResult> results = run_grad_checks(gc.seed);
        bool all_pass = true;
        for (const GradCheckResult& r : results) {
            std::printf("%-22s probes %3d  max rel err %.3e  tol %.0e  %s\n", r.name.c_str(),
                        r.probes, r.max_rel_err, r.tolerance, r.pass ? "PASS" : "FAIL");
            all_pass = all_pass && r.pass;
        }
        if (!all_pass) throw std::runtime_error("gradient check failed");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
