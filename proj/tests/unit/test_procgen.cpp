#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "disen/png_io.hpp"
#include "disen/procgen.hpp"
#include "disen/rng.hpp"
#include "helpers.hpp"

using namespace disen;
using testutil::bit_equal;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("disen_test_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Pearson chi-square statistic against the uniform distribution.
double chi_square_uniform(const std::vector<int>& counts) {
    int total = 0;
    for (int c : counts) total += c;
    const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (int c : counts) stat += (c - expected) * (c - expected) / expected;
    return stat;
}

// Upper critical values at p = 0.01.
constexpr double kChi2Crit5 = 15.086;  // df = 5 (6 categories)
constexpr double kChi2Crit7 = 18.475;  // df = 7 (8 categories)

bool scenes_equal(const SceneDescription& a, const SceneDescription& b) {
    if (a.background != b.background || a.shapes.size() != b.shapes.size()) return false;
    for (std::size_t i = 0; i < a.shapes.size(); ++i) {
        const PlacedShape &p = a.shapes[i], &q = b.shapes[i];
        if (p.shape_class != q.shape_class || p.style_id != q.style_id ||
            p.layout_id != q.layout_id || p.cx != q.cx || p.cy != q.cy || p.scale != q.scale)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("rendering is a pure function of scene and resolution") {
    SceneDescription scene = make_scene({3}, 6, 4, 1);
    Tensor a = render_scene(scene, 32);
    Tensor b = render_scene(scene, 32);
    CHECK(bit_equal(a, b));
    CHECK(a.channels() == 3);
    CHECK(a.height() == 32);
    CHECK(a.width() == 32);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(a[i] >= 0.0);
        CHECK(a[i] <= 1.0);
    }
}

TEST_CASE("centered solid-red circle renders the red palette entry at center") {
    // layout 0 = center_large, style 0 = solid red
    SceneDescription scene = make_scene({0}, 0, 0, 0);
    Tensor img = render_scene(scene, 32);
    const auto& red = style_entry(0).rgb_a;
    for (int c = 0; c < 3; ++c)
        CHECK(img.at(c, 16, 16) == std::lround(red[static_cast<std::size_t>(c)] * 255.0) / 255.0);
}

TEST_CASE("every shape fills at least one pixel in every layout") {
    for (int layout = 0; layout < kNumLayouts; ++layout)
        for (int shape = 0; shape < kNumShapes; ++shape) {
            SceneDescription scene = make_scene({shape, shape}, 0, layout, 0);
            Tensor img = render_scene(scene, 16);
            int bright = 0;
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    if (img.at(0, y, x) > 0.5) ++bright;  // red channel of solid red
            CHECK(bright > 0);
        }
}

TEST_CASE("shapes stay fully inside the canvas") {
    for (int layout = 0; layout < kNumLayouts; ++layout) {
        const LayoutEntry& e = layout_entry(layout);
        for (int slot = 0; slot < e.slots; ++slot) {
            const LayoutSlot& s = e.slot[static_cast<std::size_t>(slot)];
            CHECK(s.cx - s.scale / 2 >= 0.0);
            CHECK(s.cx + s.scale / 2 <= 1.0);
            CHECK(s.cy - s.scale / 2 >= 0.0);
            CHECK(s.cy + s.scale / 2 <= 1.0);
            CHECK(s.scale >= 0.2);
            CHECK(s.scale <= 0.6);
        }
    }
}

TEST_CASE("render_scene validates inputs") {
    SceneDescription empty;
    CHECK_THROWS_AS(render_scene(empty, 32), std::invalid_argument);

    SceneDescription scene = make_scene({0}, 0, 0, 0);
    CHECK_THROWS_AS(render_scene(scene, 24), std::invalid_argument);

    SceneDescription bad = scene;
    bad.shapes[0].style_id = 99;
    CHECK_THROWS_AS(render_scene(bad, 32), std::invalid_argument);
    CHECK_THROWS_AS(make_scene({0}, 0, 99, 0), std::invalid_argument);
}

TEST_CASE("sample_pair shares exactly the requested axis") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        PairedSample c = sample_pair(seed, ConceptKind::Content);
        CHECK(c.ref_scene.shape_class() == c.tar_scene.shape_class());
        CHECK(c.shared_value == c.ref_scene.shape_class());

        PairedSample s = sample_pair(seed, ConceptKind::Style);
        CHECK(s.ref_scene.style_id() == s.tar_scene.style_id());
        for (const PlacedShape& sh : s.ref_scene.shapes) CHECK(sh.style_id == s.shared_value);

        PairedSample l = sample_pair(seed, ConceptKind::Composition);
        CHECK(l.ref_scene.layout_id() == l.tar_scene.layout_id());
    }
}

TEST_CASE("non-shared axes are independent and uniform") {
    const int n = 1000;
    int shape_disagree = 0;
    std::vector<int> style_counts(kNumStyles, 0), layout_counts(kNumLayouts, 0),
        shape_counts(kNumShapes, 0);
    for (std::uint64_t seed = 0; seed < n; ++seed) {
        PairedSample s = sample_pair(seed, ConceptKind::Style);
        if (s.ref_scene.shape_class() != s.tar_scene.shape_class()) ++shape_disagree;
        shape_counts[static_cast<std::size_t>(s.ref_scene.shape_class())]++;
        layout_counts[static_cast<std::size_t>(s.tar_scene.layout_id())]++;

        PairedSample c = sample_pair(seed, ConceptKind::Content);
        style_counts[static_cast<std::size_t>(c.ref_scene.style_id())]++;
    }
    // Independent uniform draws disagree with probability 5/6 ≈ 0.83.
    CHECK(shape_disagree >= 700);
    CHECK(chi_square_uniform(style_counts) < kChi2Crit7);
    CHECK(chi_square_uniform(layout_counts) < kChi2Crit5);
    CHECK(chi_square_uniform(shape_counts) < kChi2Crit5);
}

TEST_CASE("sample_pair is deterministic in the seed") {
    PairedSample a = sample_pair(777, ConceptKind::Composition);
    PairedSample b = sample_pair(777, ConceptKind::Composition);
    CHECK(scenes_equal(a.ref_scene, b.ref_scene));
    CHECK(scenes_equal(a.tar_scene, b.tar_scene));
    CHECK(a.shared_value == b.shared_value);
    CHECK(a.guidance == b.guidance);
}

TEST_CASE("guidance tokens follow the concept kind") {
    PairedSample s = sample_pair(5, ConceptKind::Style);
    CHECK(s.guidance == std::vector<std::string>{"style"});
    PairedSample l = sample_pair(5, ConceptKind::Composition);
    CHECK(l.guidance == std::vector<std::string>{"composition"});
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        PairedSample c = sample_pair(seed, ConceptKind::Content);
        CHECK(c.guidance == std::vector<std::string>{shape_name(c.ref_scene.shape_class())});
    }
}

TEST_CASE("png round-trip preserves quantized images") {
    TempDir dir("png");
    SceneDescription scene = make_scene({4, 2}, 7, 3, 2);
    Tensor img = render_scene(scene, 32);
    const std::string path = (dir.path / "img.png").string();
    write_png(path, img);
    Tensor loaded = read_png(path);
    CHECK(bit_equal(img, loaded));
}

TEST_CASE("read_png rejects non-png files") {
    TempDir dir("notpng");
    const std::string path = (dir.path / "fake.png").string();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("this is not a png", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_png(path), std::runtime_error);
    CHECK_THROWS_AS(read_png((dir.path / "missing.png").string()), std::runtime_error);
}

TEST_CASE("manifest round-trip preserves metadata and pixels") {
    TempDir dir("manifest");
    std::vector<PairedSample> samples;
    std::uint64_t seed = 0;
    for (int i = 0; i < 4; ++i)
        for (ConceptKind k :
             {ConceptKind::Content, ConceptKind::Style, ConceptKind::Composition})
            samples.push_back(render_pair(seed++, k, 16));

    write_manifest(samples, 16, dir.path.string());
    Dataset loaded = read_manifest(dir.path.string());

    REQUIRE(loaded.samples.size() == samples.size());
    CHECK(loaded.resolution == 16);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const PairedSample &a = samples[i], &b = loaded.samples[i];
        CHECK(a.seed == b.seed);
        CHECK(a.shared_kind == b.shared_kind);
        CHECK(a.shared_value == b.shared_value);
        CHECK(scenes_equal(a.ref_scene, b.ref_scene));
        CHECK(scenes_equal(a.tar_scene, b.tar_scene));
        CHECK(a.guidance == b.guidance);
        CHECK(bit_equal(a.ref_image, b.ref_image));
        CHECK(bit_equal(a.tar_image, b.tar_image));
    }

    // line count equals sample count
    std::ifstream mf(dir.path / "manifest.jsonl");
    int lines = 0;
    std::string line;
    while (std::getline(mf, line))
        if (!line.empty()) ++lines;
    CHECK(lines == static_cast<int>(samples.size()));
}

TEST_CASE("read_manifest names missing images") {
    TempDir dir("missing");
    std::vector<PairedSample> samples{render_pair(3, ConceptKind::Content, 16)};
    write_manifest(samples, 16, dir.path.string());
    fs::remove(dir.path / "images" / "content_3_tar.png");
    try {
        read_manifest(dir.path.string());
        FAIL("expected read_manifest to throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("content_3_tar.png") != std::string::npos);
    }
}

TEST_CASE("style palette supports foreground separation") {
    // Probe contract: every style color has a channel above 0.5 and every
    // background stays below 0.28 in all channels.
    for (int s = 0; s < kNumStyles; ++s) {
        const StyleEntry& e = style_entry(s);
        CHECK(std::max({e.rgb_a[0], e.rgb_a[1], e.rgb_a[2]}) >= 0.75);
        if (e.texture != StyleEntry::Texture::solid)
            CHECK(std::max({e.rgb_b[0], e.rgb_b[1], e.rgb_b[2]}) >= 0.75);
    }
    for (int b = 0; b < kNumBackgrounds; ++b) {
        const auto& rgb = background_rgb(b);
        CHECK(std::max({rgb[0], rgb[1], rgb[2]}) <= 0.28);
    }
}

TEST_CASE("make_dataset is deterministic with per-kind counts and fresh seeds") {
    const Dataset a = make_dataset(5, 4, 16);
    const Dataset b = make_dataset(5, 4, 16);
    REQUIRE(a.samples.size() == 12);
    CHECK(a.resolution == 16);
    int per_kind[3] = {0, 0, 0};
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        per_kind[static_cast<int>(a.samples[i].shared_kind)]++;
        CHECK(a.samples[i].seed == b.samples[i].seed);
        CHECK(testutil::bit_equal(a.samples[i].ref_image, b.samples[i].ref_image));
    }
    CHECK(per_kind[0] == 4);
    CHECK(per_kind[1] == 4);
    CHECK(per_kind[2] == 4);

    // distinct seeds within the set, and a different config seed moves them
    const Dataset c = make_dataset(6, 4, 16);
    std::set<std::uint64_t> seeds;
    for (const PairedSample& s : a.samples) seeds.insert(s.seed);
    CHECK(seeds.size() == a.samples.size());
    CHECK(c.samples[0].seed != a.samples[0].seed);

    CHECK_THROWS_AS((void)make_dataset(5, 0, 16), std::invalid_argument);
}
