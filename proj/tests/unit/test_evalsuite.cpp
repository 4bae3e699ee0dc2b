#include "disen/evalsuite.hpp"

#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

using namespace disen;

namespace {

ModelConfig tiny16_cfg() {
    ModelConfig c;
    c.resolution = 16;
    c.patch_size = 8;
    c.d_img = 6;
    c.d_txt = 6;
    c.d_attn = 6;
    c.d_u = 4;
    c.n_q = 2;
    c.extractor_layers = 1;
    c.trunk_channels = {4, 6, 8};
    c.gn_groups = 2;
    c.time_dim = 8;
    c.time_hidden = 8;
    return c;
}

Tensor noise_image(Rng& r, int res) {
    Tensor img({3, res, res});
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = r.uniform01();
    return img;
}

}  // namespace

TEST_CASE("probe_image classifies every renderer combination exactly") {
    // Closed-world check: the probe must recover content, style, and layout
    // of every clean rendering. 2-slot layouts also vary the second shape.
    for (int l = 0; l < kNumLayouts; ++l) {
        const int slots = layout_entry(l).slots;
        for (int s0 = 0; s0 < kNumShapes; ++s0)
            for (int st = 0; st < kNumStyles; ++st)
                for (int bg = 0; bg < kNumBackgrounds; ++bg) {
                    const int second_count = slots == 2 ? 3 : 1;
                    for (int k = 0; k < second_count; ++k) {
                        const int s1 = (s0 + 2 * k + 1) % kNumShapes;
                        const SceneDescription scene = make_scene({s0, s1}, st, l, bg);
                        const ProbeResult r = probe_image(render_scene(scene, 32));
                        CAPTURE(l);
                        CAPTURE(s0);
                        CAPTURE(st);
                        CAPTURE(bg);
                        CAPTURE(s1);
                        CHECK(r.content == s0);
                        CHECK(r.style == st);
                        CHECK(r.layout == l);
                    }
                }
    }
}

TEST_CASE("probe_image round-trips rendered pairs") {
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 10; ++i) {
            const PairedSample s =
                render_pair(900 + static_cast<std::uint64_t>(10 * k + i),
                            static_cast<ConceptKind>(k), 32);
            const ProbeResult pr = probe_image(s.ref_image);
            CHECK(pr.content == s.ref_scene.shape_class());
            CHECK(pr.style == s.ref_scene.style_id());
            CHECK(pr.layout == s.ref_scene.layout_id());
            CHECK(probe_value(probe_image(s.tar_image), s.shared_kind) == s.shared_value);
        }
}

TEST_CASE("probe on noise hits chance against independent labels") {
    // Detected values on noise are independent of a separately drawn ground
    // truth, so match rate must sit inside generous 4-sigma binomial bounds.
    Rng r(20260814);
    const int trials = 300;
    for (int k = 0; k < 3; ++k) {
        const ConceptKind kind = static_cast<ConceptKind>(k);
        const double p = probe_chance(kind);
        const int n_values = static_cast<int>(std::lround(1.0 / p));
        int matches = 0;
        for (int i = 0; i < trials; ++i) {
            const Tensor img = noise_image(r, 32);
            const int expected = static_cast<int>(r.below(static_cast<std::uint64_t>(n_values)));
            const int detected = probe_value(probe_image(img), kind);
            CHECK(detected >= 0);
            CHECK(detected < n_values);
            matches += detected == expected ? 1 : 0;
        }
        const double sigma = std::sqrt(trials * p * (1.0 - p));
        CAPTURE(k);
        CAPTURE(matches);
        CHECK(matches > trials * p - 4.0 * sigma);
        CHECK(matches < trials * p + 4.0 * sigma);
    }
}

TEST_CASE("probe_image marks dark images unclassifiable") {
    Tensor dark({3, 32, 32});
    for (std::size_t i = 0; i < dark.numel(); ++i) dark[i] = 0.12;
    const ProbeResult r = probe_image(dark);
    CHECK(r.content == -1);
    CHECK(r.style == -1);
    CHECK(r.layout == -1);
    CHECK(probe_value(r, ConceptKind::Style) == -1);
    CHECK_THROWS_AS(probe_image(Tensor({3, 16, 32})), std::invalid_argument);
    CHECK_THROWS_AS(probe_image(Tensor({16, 16})), std::invalid_argument);
}

TEST_CASE("probe_chance values") {
    CHECK(probe_chance(ConceptKind::Content) == doctest::Approx(1.0 / 6));
    CHECK(probe_chance(ConceptKind::Style) == doctest::Approx(1.0 / 8));
    CHECK(probe_chance(ConceptKind::Composition) == doctest::Approx(1.0 / 6));
}

TEST_CASE("make_eval_set renders per_kind pairs of every kind") {
    const auto set = make_eval_set(7, 4, 16);
    REQUIRE(set.size() == 12);
    std::array<int, 3> counts{};
    for (const PairedSample& s : set) {
        counts[static_cast<std::size_t>(s.shared_kind)] += 1;
        CHECK(s.ref_image.height() == 16);
        CHECK(s.tar_image.height() == 16);
    }
    for (int c : counts) CHECK(c == 4);

    const auto again = make_eval_set(7, 4, 16);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(set[i].seed == again[i].seed);
        CHECK(testutil::bit_equal(set[i].ref_image, again[i].ref_image));
    }
    const auto other = make_eval_set(8, 4, 16);
    CHECK(set[0].seed != other[0].seed);
    CHECK_THROWS_AS(make_eval_set(7, 0, 16), std::invalid_argument);
}

TEST_CASE("orthogonality_report on kind-aligned basis vectors") {
    // rep = e_{kind}: within-kind cosine 1, cross-kind cosine 0.
    const auto set = make_eval_set(3, 30, 16);
    const RepFn rep = [](const PairedSample& s) {
        Tensor t({8});
        t[static_cast<std::size_t>(s.shared_kind)] = 1.0;
        return t;
    };
    const OrthogonalityReport rpt = orthogonality_report(set, rep);
    for (int a = 0; a < 3; ++a) {
        CHECK(rpt.kind_counts[static_cast<std::size_t>(a)] == 30);
        for (int b = 0; b < 3; ++b) {
            const PairStat& p = rpt.pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            CHECK(p.mean_abs_cos == doctest::Approx(a == b ? 1.0 : 0.0));
            CHECK(p.mean_cos == doctest::Approx(a == b ? 1.0 : 0.0));
            CHECK(p.stddev == doctest::Approx(0.0));
            CHECK(p.count == (a == b ? 30 * 29 / 2 : 30 * 30));
        }
    }
    CHECK(rpt.inter_mean_abs() == doctest::Approx(0.0));
    CHECK(rpt.intra_mean_cos() == doctest::Approx(1.0));

    const std::string json = rpt.to_json();
    CHECK(json.find("content|style") != std::string::npos);
    CHECK(json.find("inter_mean_abs_cos") != std::string::npos);
}

TEST_CASE("orthogonality_report on a shared fixed vector") {
    const auto set = make_eval_set(4, 30, 16);
    const RepFn rep = [](const PairedSample&) {
        Tensor t({5});
        t[0] = 2.0;
        t[3] = -1.0;
        return t;
    };
    const OrthogonalityReport rpt = orthogonality_report(set, rep);
    CHECK(rpt.inter_mean_abs() == doctest::Approx(1.0));
    CHECK(rpt.intra_mean_cos() == doctest::Approx(1.0));
    CHECK(rpt.pair[0][1].mean_cos == doctest::Approx(1.0));
}

TEST_CASE("orthogonality_report on random unit vectors matches E|cos|") {
    // Independent uniform unit vectors in d=64: E|cos| ~ sqrt(2/(pi*64)) ~ 0.0997.
    const auto set = make_eval_set(5, 40, 16);
    Rng r(99);
    std::vector<Tensor> reps;
    for (std::size_t i = 0; i < set.size(); ++i) reps.push_back(testutil::random_unit(r, 64));
    const RepFn rep = [&](const PairedSample& s) {
        for (std::size_t i = 0; i < set.size(); ++i)
            if (set[i].seed == s.seed) return reps[i];
        throw std::logic_error("sample not in set");
    };
    const OrthogonalityReport rpt = orthogonality_report(set, rep);
    const double expect = std::sqrt(2.0 / (3.14159265358979 * 64.0));
    CHECK(rpt.inter_mean_abs() == doctest::Approx(expect).epsilon(0.3));
    CHECK(std::fabs(rpt.pair[0][0].mean_cos) < 0.05);
    // Symmetry of the pair matrix.
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(rpt.pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].mean_abs_cos ==
                  rpt.pair[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)].mean_abs_cos);
}

TEST_CASE("orthogonality_report rejects undersized sets and zero reps") {
    const auto small = make_eval_set(6, 5, 16);
    const RepFn unit = [](const PairedSample&) {
        Tensor t({3});
        t[1] = 1.0;
        return t;
    };
    CHECK_THROWS_WITH_AS(orthogonality_report(small, unit), doctest::Contains("at least 30"),
                         std::invalid_argument);
    CHECK_NOTHROW(orthogonality_report(small, unit, 5));

    const RepFn zero = [](const PairedSample&) { return Tensor({3}); };
    CHECK_THROWS_WITH_AS(orthogonality_report(small, zero, 5), doctest::Contains("zero"),
                         std::invalid_argument);
}

TEST_CASE("pooled_rep is a unit vector of width d_u") {
    const ModelConfig cfg = tiny16_cfg();
    const ModelParams mp(cfg, 5);
    const PairedSample s = render_pair(42, ConceptKind::Style, cfg.resolution);
    const Tensor p = pooled_rep(s, mp.enc, mp.ext, cfg);
    REQUIRE(p.numel() == static_cast<std::size_t>(cfg.d_u));
    double norm = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) norm += p[i] * p[i];
    CHECK(std::sqrt(norm) == doctest::Approx(1.0));
}

TEST_CASE("probe_eval reports consistent trial rows") {
    const ModelConfig cfg = tiny16_cfg();
    const ModelParams mp(cfg, 5);
    const NoiseSchedule sched(10);
    SamplerConfig sc;
    sc.ddim_steps = 2;
    sc.omega = 1.0;
    sc.mu = 1.0;
    sc.seed = 21;

    const ProbeReport rpt = probe_eval(mp, ConceptKind::Content, 5, sc, sched);
    CHECK(rpt.kind == ConceptKind::Content);
    CHECK(rpt.trials == 5);
    REQUIRE(rpt.rows.size() == 5);
    int matches = 0;
    std::set<std::uint64_t> seeds;
    for (const ProbeTrialRow& row : rpt.rows) {
        CHECK(row.expected >= 0);
        CHECK(row.expected < kNumShapes);
        CHECK(row.detected >= -1);
        CHECK(row.detected < kNumShapes);
        CHECK(row.match == (row.detected == row.expected));
        matches += row.match ? 1 : 0;
        seeds.insert(row.sample_seed);
    }
    CHECK(rpt.matches == matches);
    CHECK(rpt.accuracy == doctest::Approx(static_cast<double>(matches) / 5));
    CHECK(seeds.size() == 5);  // distinct trial draws

    const ProbeReport again = probe_eval(mp, ConceptKind::Content, 5, sc, sched);
    CHECK(again.to_json() == rpt.to_json());

    SamplerConfig other = sc;
    other.seed = 22;
    const ProbeReport moved = probe_eval(mp, ConceptKind::Content, 5, other, sched);
    CHECK(moved.rows[0].sample_seed != rpt.rows[0].sample_seed);

    CHECK_THROWS_AS(probe_eval(mp, ConceptKind::Content, 0, sc, sched), std::invalid_argument);
}

TEST_CASE("sweep matches probe_eval per value and renders csv") {
    const ModelConfig cfg = tiny16_cfg();
    const ModelParams mp(cfg, 5);
    const NoiseSchedule sched(10);
    SamplerConfig sc;
    sc.ddim_steps = 2;
    sc.omega = 1.0;
    sc.mu = 0.7;
    sc.seed = 31;

    const std::vector<double> mus = {1.0, 0.0};
    const auto reports = sweep(mp, SweepParam::mu, mus, ConceptKind::Style, 3, sc, sched);
    REQUIRE(reports.size() == 2);

    SamplerConfig at_one = sc;
    at_one.mu = 1.0;
    CHECK(reports[0].to_json() == probe_eval(mp, ConceptKind::Style, 3, at_one, sched).to_json());

    const std::string csv = sweep_csv(SweepParam::mu, mus, reports);
    CHECK(csv.rfind("mu,kind,trials,matches,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("style") != std::string::npos);

    CHECK(sweep_param_from_name("mu") == SweepParam::mu);
    CHECK(sweep_param_from_name("omega") == SweepParam::omega);
    CHECK_THROWS_AS(sweep_param_from_name("lambda"), std::invalid_argument);
    CHECK_THROWS_AS(sweep(mp, SweepParam::mu, {}, ConceptKind::Style, 3, sc, sched),
                    std::invalid_argument);
    CHECK_THROWS_AS(sweep_csv(SweepParam::mu, {1.0}, reports), std::invalid_argument);
}
