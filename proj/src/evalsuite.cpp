#include "disen/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace disen {

namespace {

// Foreground templates per (layout, slot, shape), built with the renderer's
// own 4x4 subsampling rule so a rendered silhouette matches its template up
// to the style/background-dependent rounding of boundary pixels.
struct Templates {
    int res = 0;
    // mask[layout][slot][shape] over res*res pixels; area alongside.
    std::array<std::array<std::array<std::vector<std::uint8_t>, kNumShapes>, 2>, kNumLayouts> mask;
    std::array<std::array<std::array<int, kNumShapes>, 2>, kNumLayouts> area{};
};

std::vector<std::uint8_t> shape_template(const PlacedShape& shape, int res) {
    constexpr int kSS = 4;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(res) * static_cast<std::size_t>(res));
    const double inv_res = 1.0 / res;
    for (int py = 0; py < res; ++py)
        for (int px = 0; px < res; ++px) {
            int inside = 0;
            for (int sy = 0; sy < kSS; ++sy)
                for (int sx = 0; sx < kSS; ++sx) {
                    const double x = (px + (sx + 0.5) / kSS) * inv_res;
                    const double y = (py + (sy + 0.5) / kSS) * inv_res;
                    if (point_in_shape(shape, x, y)) ++inside;
                }
            mask[static_cast<std::size_t>(py) * static_cast<std::size_t>(res) +
                 static_cast<std::size_t>(px)] = inside >= kSS * kSS / 2 ? 1 : 0;
        }
    return mask;
}

const Templates& templates_for(int res) {
    static std::map<int, Templates> cache;
    auto it = cache.find(res);
    if (it != cache.end()) return it->second;

    Templates t;
    t.res = res;
    for (int l = 0; l < kNumLayouts; ++l) {
        const LayoutEntry& layout = layout_entry(l);
        for (int slot = 0; slot < layout.slots; ++slot)
            for (int s = 0; s < kNumShapes; ++s) {
                PlacedShape p;
                p.shape_class = s;
                p.layout_id = l;
                p.cx = layout.slot[static_cast<std::size_t>(slot)].cx;
                p.cy = layout.slot[static_cast<std::size_t>(slot)].cy;
                p.scale = layout.slot[static_cast<std::size_t>(slot)].scale;
                auto mask = shape_template(p, res);
                int area = 0;
                for (std::uint8_t v : mask) area += v;
                t.area[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot)]
                      [static_cast<std::size_t>(s)] = area;
                t.mask[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot)]
                      [static_cast<std::size_t>(s)] = std::move(mask);
            }
    }
    return cache.emplace(res, std::move(t)).first->second;
}

double sq_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

double inf_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

std::array<double, 3> pixel_rgb(const Tensor& image, int y, int x) {
    return {image.at(0, y, x), image.at(1, y, x), image.at(2, y, x)};
}

// Background covers the majority of every scene, so the per-channel median
// recovers it exactly on clean renders and robustly on generated images.
std::array<double, 3> background_estimate(const Tensor& image) {
    const int res = image.height();
    const std::size_t n = static_cast<std::size_t>(res) * static_cast<std::size_t>(res);
    std::array<double, 3> bg{};
    std::vector<double> vals(n);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                vals[static_cast<std::size_t>(y) * static_cast<std::size_t>(res) +
                     static_cast<std::size_t>(x)] = image.at(c, y, x);
        auto mid = vals.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(vals.begin(), mid, vals.end());
        bg[static_cast<std::size_t>(c)] = *mid;
    }
    return bg;
}

// Style from color statistics over a generous background-distance mask: a
// noticeable near-white fraction marks a stripe palette (identified by its
// colored band), anything else matches the nearest solid.
int classify_style(const Tensor& image, const std::array<double, 3>& bg, double rough_thr) {
    const int res = image.height();
    std::array<double, 3> mean_all{};
    std::array<double, 3> mean_colored{};
    int n_fg = 0, n_white = 0, n_colored = 0;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            const std::array<double, 3> p = pixel_rgb(image, y, x);
            if (inf_dist(p, bg) <= rough_thr) continue;
            ++n_fg;
            for (int c = 0; c < 3; ++c) mean_all[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)];
            if (std::min({p[0], p[1], p[2]}) > 0.8) {
                ++n_white;
            } else {
                ++n_colored;
                for (int c = 0; c < 3; ++c)
                    mean_colored[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)];
            }
        }
    if (n_fg == 0) return -1;

    const bool striped = static_cast<double>(n_white) / n_fg > 0.15;
    if (striped && n_colored == 0) return -1;
    auto& mean = striped ? mean_colored : mean_all;
    for (double& v : mean) v /= striped ? n_colored : n_fg;
    double best = 0.0;
    int best_style = -1;
    for (int st = 0; st < kNumStyles; ++st) {
        const StyleEntry& e = style_entry(st);
        if ((e.texture == StyleEntry::Texture::solid) == striped) continue;
        const double d = sq_dist(mean, striped ? e.rgb_b : e.rgb_a);
        if (best_style < 0 || d < best) {
            best = d;
            best_style = st;
        }
    }
    return best_style;
}

// Binarizes at half the palette's background distance: a boundary pixel with
// coverage k/16 sits at (k/16) * |fg_color - bg| from the background, so the
// cut reproduces the renderer's >= 8/16 template rule exactly (the 0.01 slack
// absorbs 8-bit quantization).
std::vector<std::uint8_t> foreground_mask(const Tensor& image, const std::array<double, 3>& bg,
                                          int style, double max_dist, int* fg_count) {
    const int res = image.height();
    std::vector<std::uint8_t> fg(static_cast<std::size_t>(res) * static_cast<std::size_t>(res));
    const StyleEntry* e = style >= 0 ? &style_entry(style) : nullptr;
    const bool striped = e != nullptr && e->texture != StyleEntry::Texture::solid;
    const double solid_thr =
        e != nullptr ? 0.5 * inf_dist(e->rgb_a, bg) - 0.01 : 0.5 * max_dist - 0.01;
    const double band_b_thr = striped ? 0.5 * inf_dist(e->rgb_b, bg) - 0.01 : 0.0;
    *fg_count = 0;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            const std::array<double, 3> p = pixel_rgb(image, y, x);
            double thr = solid_thr;
            if (striped && sq_dist(p, e->rgb_b) < sq_dist(p, e->rgb_a)) thr = band_b_thr;
            const bool f = inf_dist(p, bg) > thr;
            fg[static_cast<std::size_t>(y) * static_cast<std::size_t>(res) +
               static_cast<std::size_t>(x)] = f ? 1 : 0;
            *fg_count += f ? 1 : 0;
        }
    return fg;
}

}  // namespace

ProbeResult probe_image(const Tensor& image) {
    if (image.ndim() != 3 || image.channels() != 3 || image.height() != image.width())
        throw std::invalid_argument("probe_image: expected a square [3,R,R] image");
    const int res = image.height();
    const std::size_t n = static_cast<std::size_t>(res) * static_cast<std::size_t>(res);

    ProbeResult out;
    const std::array<double, 3> bg = background_estimate(image);
    double max_dist = 0.0;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            max_dist = std::max(max_dist, inf_dist(pixel_rgb(image, y, x), bg));
    if (max_dist < 0.3) return out;  // flat image: unclassifiable

    const int style = classify_style(image, bg, 0.25 * max_dist);
    int fg_count = 0;
    const std::vector<std::uint8_t> fg = foreground_mask(image, bg, style, max_dist, &fg_count);
    if (fg_count == 0) return out;

    const Templates& t = templates_for(res);
    auto intersection = [&](int l, int slot, int s) {
        const auto& mask = t.mask[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot)]
                                 [static_cast<std::size_t>(s)];
        int count = 0;
        for (std::size_t i = 0; i < n; ++i) count += mask[i] & fg[i];
        return count;
    };

    double best = 0.0;
    int best_s = -1, best_l = -1;
    for (int l = 0; l < kNumLayouts; ++l) {
        const int slots = layout_entry(l).slots;
        std::array<std::array<int, kNumShapes>, 2> inter{};
        for (int slot = 0; slot < slots; ++slot)
            for (int s = 0; s < kNumShapes; ++s)
                inter[static_cast<std::size_t>(slot)][static_cast<std::size_t>(s)] =
                    intersection(l, slot, s);
        const auto area = [&](int slot, int s) {
            return t.area[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot)]
                         [static_cast<std::size_t>(s)];
        };
        for (int s0 = 0; s0 < kNumShapes; ++s0) {
            if (slots == 1) {
                const int i0 = inter[0][static_cast<std::size_t>(s0)];
                const double iou =
                    static_cast<double>(i0) / (fg_count + area(0, s0) - i0);
                if (iou > best) {
                    best = iou;
                    best_s = s0;
                    best_l = l;
                }
            } else {
                for (int s1 = 0; s1 < kNumShapes; ++s1) {
                    const int i0 = inter[0][static_cast<std::size_t>(s0)];
                    const int i1 = inter[1][static_cast<std::size_t>(s1)];
                    const double iou = static_cast<double>(i0 + i1) /
                                       (fg_count + area(0, s0) + area(1, s1) - i0 - i1);
                    if (iou > best) {
                        best = iou;
                        best_s = s0;
                        best_l = l;
                    }
                }
            }
        }
    }
    out.content = best_s;
    out.layout = best_l;
    out.style = style;
    return out;
}

int probe_value(const ProbeResult& r, ConceptKind kind) {
    switch (kind) {
        case ConceptKind::Content: return r.content;
        case ConceptKind::Style: return r.style;
        case ConceptKind::Composition: return r.layout;
    }
    throw std::invalid_argument("probe_value: bad kind");
}

double probe_chance(ConceptKind kind) {
    switch (kind) {
        case ConceptKind::Content: return 1.0 / kNumShapes;
        case ConceptKind::Style: return 1.0 / kNumStyles;
        case ConceptKind::Composition: return 1.0 / kNumLayouts;
    }
    throw std::invalid_argument("probe_chance: bad kind");
}

// --- orthogonality statistics ---------------------------------------------------

namespace {

struct Accum {
    double sum_abs = 0.0, sum_sq_abs = 0.0, sum_cos = 0.0;
    int n = 0;
};

}  // namespace

double OrthogonalityReport::inter_mean_abs() const {
    double sum = 0.0;
    int n = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            sum += pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].mean_abs_cos *
                   pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].count;
            n += pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].count;
        }
    return n > 0 ? sum / n : 0.0;
}

double OrthogonalityReport::intra_mean_cos() const {
    double sum = 0.0;
    int n = 0;
    for (int a = 0; a < 3; ++a) {
        sum += pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)].mean_cos *
               pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)].count;
        n += pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)].count;
    }
    return n > 0 ? sum / n : 0.0;
}

std::string OrthogonalityReport::to_json() const {
    nlohmann::json pairs;
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const PairStat& p = pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            const std::string key = std::string(kind_name(static_cast<ConceptKind>(a))) + "|" +
                                    kind_name(static_cast<ConceptKind>(b));
            pairs[key] = {{"mean_abs_cos", p.mean_abs_cos},
                          {"mean_cos", p.mean_cos},
                          {"stddev", p.stddev},
                          {"count", p.count}};
        }
    nlohmann::json counts;
    for (int a = 0; a < 3; ++a)
        counts[kind_name(static_cast<ConceptKind>(a))] = kind_counts[static_cast<std::size_t>(a)];
    return nlohmann::json{{"pairs", pairs},
                          {"kind_counts", counts},
                          {"inter_mean_abs_cos", inter_mean_abs()},
                          {"intra_mean_cos", intra_mean_cos()}}
        .dump(2);
}

OrthogonalityReport orthogonality_report(const std::vector<PairedSample>& eval_set,
                                         const RepFn& rep, int min_per_kind) {
    OrthogonalityReport report;
    for (const PairedSample& s : eval_set)
        report.kind_counts[static_cast<std::size_t>(s.shared_kind)] += 1;
    for (int k = 0; k < 3; ++k)
        if (report.kind_counts[static_cast<std::size_t>(k)] < min_per_kind)
            throw std::invalid_argument(
                "orthogonality_report: need at least " + std::to_string(min_per_kind) + " " +
                kind_name(static_cast<ConceptKind>(k)) + " samples, got " +
                std::to_string(report.kind_counts[static_cast<std::size_t>(k)]));

    std::vector<Tensor> reps;
    reps.reserve(eval_set.size());
    for (const PairedSample& s : eval_set) {
        Tensor r = rep(s);
        double norm = 0.0;
        for (std::size_t i = 0; i < r.numel(); ++i) norm += r[i] * r[i];
        norm = std::sqrt(norm);
        if (!(norm > 0.0))
            throw std::invalid_argument("orthogonality_report: zero representation");
        for (std::size_t i = 0; i < r.numel(); ++i) r[i] /= norm;
        reps.push_back(std::move(r));
    }

    std::array<std::array<Accum, 3>, 3> acc{};
    for (std::size_t i = 0; i < eval_set.size(); ++i)
        for (std::size_t j = i + 1; j < eval_set.size(); ++j) {
            reps[i].check_same_shape(reps[j], "orthogonality_report");
            double c = 0.0;
            for (std::size_t k = 0; k < reps[i].numel(); ++k) c += reps[i][k] * reps[j][k];
            const int a = std::min(static_cast<int>(eval_set[i].shared_kind),
                                   static_cast<int>(eval_set[j].shared_kind));
            const int b = std::max(static_cast<int>(eval_set[i].shared_kind),
                                   static_cast<int>(eval_set[j].shared_kind));
            Accum& slot = acc[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            slot.sum_abs += std::fabs(c);
            slot.sum_sq_abs += c * c;
            slot.sum_cos += c;
            slot.n += 1;
        }

    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const Accum& s = acc[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            PairStat p;
            p.count = s.n;
            if (s.n > 0) {
                p.mean_abs_cos = s.sum_abs / s.n;
                p.mean_cos = s.sum_cos / s.n;
                p.stddev = std::sqrt(
                    std::max(0.0, s.sum_sq_abs / s.n - p.mean_abs_cos * p.mean_abs_cos));
            }
            report.pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = p;
            report.pair[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = p;
        }
    return report;
}

Tensor pooled_rep(const PairedSample& s, const EncoderParams& enc, const ExtractorParams& ext,
                  const ModelConfig& cfg) {
    return extract_rep(s.ref_image, s.guidance, QueryKind::main, enc, ext, cfg).pooled;
}

std::vector<PairedSample> make_eval_set(std::uint64_t seed, int per_kind, int resolution) {
    if (per_kind <= 0) throw std::invalid_argument("make_eval_set: per_kind must be positive");
    std::vector<PairedSample> out;
    out.reserve(static_cast<std::size_t>(per_kind) * 3);
    for (int k = 0; k < 3; ++k) {
        Rng r = substream(seed, Stream::eval_set, static_cast<std::uint64_t>(k));
        for (int i = 0; i < per_kind; ++i)
            out.push_back(render_pair(r.next_u64(), static_cast<ConceptKind>(k), resolution));
    }
    return out;
}

// --- generation probes ---------------------------------------------------------------

std::string ProbeReport::to_json() const {
    nlohmann::json detail = nlohmann::json::array();
    for (const ProbeTrialRow& r : rows)
        detail.push_back({{"sample_seed", r.sample_seed},
                          {"expected", r.expected},
                          {"detected", r.detected},
                          {"match", r.match}});
    return nlohmann::json{{"kind", kind_name(kind)},
                          {"trials", trials},
                          {"matches", matches},
                          {"accuracy", accuracy},
                          {"chance", probe_chance(kind)},
                          {"rows", detail}}
        .dump(2);
}

ProbeReport probe_eval(const ModelParams& mp, ConceptKind kind, int trials,
                       const SamplerConfig& sampler, const NoiseSchedule& sched) {
    if (trials <= 0) throw std::invalid_argument("probe_eval: trials must be positive");
    sampler.validate(sched.T);

    ProbeReport report;
    report.kind = kind;
    report.trials = trials;
    for (int i = 0; i < trials; ++i) {
        Rng tr = substream(sampler.seed, Stream::probe_trial, static_cast<std::uint64_t>(kind),
                           static_cast<std::uint64_t>(i));
        const std::uint64_t pair_seed = tr.next_u64();
        const PairedSample s = render_pair(pair_seed, kind, mp.cfg.resolution);

        const ConceptRep rep = extract_rep(s.ref_image, s.guidance, QueryKind::main, mp.enc,
                                           mp.ext, mp.cfg);
        const std::array<int, kPromptLen> prompt =
            mask_prompt_axis(prompt_token_ids(s.tar_scene), kind);
        SamplerConfig sc = sampler;
        sc.seed = tr.next_u64();
        ConceptBundle bundle;
        bundle.push_back(MaskedConcept{rep, Tensor()});
        const Tensor image = ddim_sample(prompt, bundle, sc, sched, mp.den, mp.enc, mp.cfg);

        ProbeTrialRow row;
        row.sample_seed = pair_seed;
        row.expected = s.shared_value;
        row.detected = probe_value(probe_image(image), kind);
        row.match = row.detected == row.expected;
        report.matches += row.match ? 1 : 0;
        report.rows.push_back(row);
    }
    report.accuracy = static_cast<double>(report.matches) / trials;
    return report;
}

// --- sweeps -------------------------------------------------------------------------

SweepParam sweep_param_from_name(const std::string& name) {
    if (name == "mu") return SweepParam::mu;
    if (name == "omega") return SweepParam::omega;
    throw std::invalid_argument("unknown sweep parameter: " + name + " (expected mu or omega)");
}

std::vector<ProbeReport> sweep(const ModelParams& mp, SweepParam param,
                               const std::vector<double>& values, ConceptKind kind, int trials,
                               const SamplerConfig& base, const NoiseSchedule& sched) {
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");
    std::vector<ProbeReport> out;
    out.reserve(values.size());
    for (double v : values) {
        SamplerConfig sc = base;
        (param == SweepParam::mu ? sc.mu : sc.omega) = v;
        out.push_back(probe_eval(mp, kind, trials, sc, sched));
    }
    return out;
}

std::string sweep_csv(SweepParam param, const std::vector<double>& values,
                      const std::vector<ProbeReport>& reports) {
    if (values.size() != reports.size())
        throw std::invalid_argument("sweep_csv: value/report count mismatch");
    std::string csv = std::string(param == SweepParam::mu ? "mu" : "omega") +
                      ",kind,trials,matches,accuracy\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        csv += nlohmann::json(values[i]).dump();
        csv += ",";
        csv += kind_name(reports[i].kind);
        csv += "," + std::to_string(reports[i].trials) + "," + std::to_string(reports[i].matches);
        csv += "," + nlohmann::json(reports[i].accuracy).dump() + "\n";
    }
    return csv;
}

}  // namespace disen
