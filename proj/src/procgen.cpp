#include "disen/procgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "disen/png_io.hpp"
#include "disen/rng.hpp"

namespace disen {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kShapeNames[kNumShapes] = {"circle", "square", "triangle", "star", "cross", "ring"};

const StyleEntry kStyles[kNumStyles] = {
    {"red", StyleEntry::Texture::solid, {0.90, 0.15, 0.15}, {0, 0, 0}},
    {"green", StyleEntry::Texture::solid, {0.15, 0.90, 0.15}, {0, 0, 0}},
    {"blue", StyleEntry::Texture::solid, {0.25, 0.35, 0.95}, {0, 0, 0}},
    {"yellow", StyleEntry::Texture::solid, {0.92, 0.88, 0.15}, {0, 0, 0}},
    {"magenta", StyleEntry::Texture::solid, {0.90, 0.20, 0.90}, {0, 0, 0}},
    {"cyan", StyleEntry::Texture::solid, {0.15, 0.88, 0.90}, {0, 0, 0}},
    {"white_orange_hstripe", StyleEntry::Texture::hstripe, {0.95, 0.95, 0.95}, {0.95, 0.55, 0.10}},
    {"white_purple_vstripe", StyleEntry::Texture::vstripe, {0.95, 0.95, 0.95}, {0.60, 0.20, 0.85}},
};

const LayoutEntry kLayouts[kNumLayouts] = {
    {"center_large", 1, {{{0.50, 0.50, 0.55}, {0, 0, 0}}}},
    {"top_left_small", 1, {{{0.30, 0.30, 0.30}, {0, 0, 0}}}},
    {"side_by_side", 2, {{{0.30, 0.50, 0.32}, {0.70, 0.50, 0.32}}}},
    {"diagonal_pair", 2, {{{0.30, 0.30, 0.30}, {0.72, 0.72, 0.30}}}},
    {"bottom_wide", 1, {{{0.50, 0.70, 0.50}, {0, 0, 0}}}},
    {"top_narrow", 1, {{{0.50, 0.28, 0.34}, {0, 0, 0}}}},
};

const std::array<double, 3> kBackgrounds[kNumBackgrounds] = {
    {0.05, 0.05, 0.08},
    {0.15, 0.15, 0.17},
    {0.08, 0.10, 0.20},
    {0.08, 0.18, 0.10},
};

// 5-pointed star vertices in local [-0.5,0.5]² coordinates, apex up.
struct StarPolygon {
    std::array<double, 10> vx, vy;
    StarPolygon() {
        const double outer = 0.50, inner = 0.21;
        for (int i = 0; i < 10; ++i) {
            const double r = (i % 2 == 0) ? outer : inner;
            const double a = -kPi / 2 + i * kPi / 5;
            vx[static_cast<std::size_t>(i)] = r * std::cos(a);
            vy[static_cast<std::size_t>(i)] = r * std::sin(a);
        }
    }
};
const StarPolygon kStar;

bool in_star(double u, double v) {
    // even-odd ray casting against the 10-gon
    bool inside = false;
    for (int i = 0, j = 9; i < 10; j = i++) {
        const double xi = kStar.vx[static_cast<std::size_t>(i)], yi = kStar.vy[static_cast<std::size_t>(i)];
        const double xj = kStar.vx[static_cast<std::size_t>(j)], yj = kStar.vy[static_cast<std::size_t>(j)];
        if ((yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

std::array<double, 3> style_color(const StyleEntry& style, double x, double y) {
    switch (style.texture) {
        case StyleEntry::Texture::solid:
            return style.rgb_a;
        case StyleEntry::Texture::hstripe: {
            const int band = static_cast<int>(std::floor(y * 8.0));
            return band % 2 == 0 ? style.rgb_a : style.rgb_b;
        }
        case StyleEntry::Texture::vstripe: {
            const int band = static_cast<int>(std::floor(x * 8.0));
            return band % 2 == 0 ? style.rgb_a : style.rgb_b;
        }
    }
    return style.rgb_a;
}

void check_scene(const SceneDescription& scene) {
    if (scene.shapes.empty() || scene.shapes.size() > 2)
        throw std::invalid_argument("render_scene: scene must contain 1 or 2 shapes");
    if (scene.background < 0 || scene.background >= kNumBackgrounds)
        throw std::invalid_argument("render_scene: background id out of range");
    for (const PlacedShape& s : scene.shapes) {
        if (s.shape_class < 0 || s.shape_class >= kNumShapes)
            throw std::invalid_argument("render_scene: shape_class out of range");
        if (s.style_id < 0 || s.style_id >= kNumStyles)
            throw std::invalid_argument("render_scene: style_id out of range");
        if (s.layout_id < 0 || s.layout_id >= kNumLayouts)
            throw std::invalid_argument("render_scene: layout_id out of range");
    }
}

}  // namespace

const char* kind_name(ConceptKind k) {
    switch (k) {
        case ConceptKind::Content: return "content";
        case ConceptKind::Style: return "style";
        case ConceptKind::Composition: return "composition";
    }
    throw std::invalid_argument("kind_name: bad enum value");
}

ConceptKind kind_from_name(const std::string& name) {
    if (name == "content") return ConceptKind::Content;
    if (name == "style") return ConceptKind::Style;
    if (name == "composition") return ConceptKind::Composition;
    throw std::invalid_argument("unknown concept kind: " + name);
}

const char* shape_name(int shape_class) {
    if (shape_class < 0 || shape_class >= kNumShapes)
        throw std::invalid_argument("shape_name: index out of range");
    return kShapeNames[shape_class];
}

const StyleEntry& style_entry(int style_id) {
    if (style_id < 0 || style_id >= kNumStyles)
        throw std::invalid_argument("style_entry: index out of range");
    return kStyles[style_id];
}

const LayoutEntry& layout_entry(int layout_id) {
    if (layout_id < 0 || layout_id >= kNumLayouts)
        throw std::invalid_argument("layout_entry: index out of range");
    return kLayouts[layout_id];
}

std::array<double, 3> background_rgb(int background_id) {
    if (background_id < 0 || background_id >= kNumBackgrounds)
        throw std::invalid_argument("background_rgb: index out of range");
    return kBackgrounds[background_id];
}

SceneDescription make_scene(const std::vector<int>& shape_classes, int style_id, int layout_id,
                            int background) {
    const LayoutEntry& layout = layout_entry(layout_id);
    if (shape_classes.empty()) throw std::invalid_argument("make_scene: no shapes given");
    SceneDescription scene;
    scene.background = background;
    for (int slot = 0; slot < layout.slots; ++slot) {
        PlacedShape s;
        s.shape_class = shape_classes[std::min<std::size_t>(static_cast<std::size_t>(slot),
                                                            shape_classes.size() - 1)];
        s.style_id = style_id;
        s.layout_id = layout_id;
        s.cx = layout.slot[static_cast<std::size_t>(slot)].cx;
        s.cy = layout.slot[static_cast<std::size_t>(slot)].cy;
        s.scale = layout.slot[static_cast<std::size_t>(slot)].scale;
        scene.shapes.push_back(s);
    }
    return scene;
}

bool point_in_shape(const PlacedShape& shape, double x, double y) {
    const double u = (x - shape.cx) / shape.scale;
    const double v = (y - shape.cy) / shape.scale;
    if (u < -0.5 || u > 0.5 || v < -0.5 || v > 0.5) return false;
    switch (shape.shape_class) {
        case 0:  // circle
            return u * u + v * v <= 0.25;
        case 1:  // square
            return true;  // the bounding box itself
        case 2:  // triangle, apex up
            return std::fabs(u) <= (v + 0.5) * 0.5;
        case 3:  // star
            return in_star(u, v);
        case 4:  // cross
            return std::fabs(u) <= 0.17 || std::fabs(v) <= 0.17;
        case 5: {  // ring
            const double r2 = u * u + v * v;
            return r2 <= 0.25 && r2 >= 0.09;
        }
        default:
            throw std::invalid_argument("point_in_shape: shape_class out of range");
    }
}

Tensor render_scene(const SceneDescription& scene, int resolution) {
    if (resolution != 16 && resolution != 32 && resolution != 64)
        throw std::invalid_argument("render_scene: resolution must be 16, 32, or 64");
    check_scene(scene);

    const std::array<double, 3> bg = background_rgb(scene.background);
    Tensor image({3, resolution, resolution});

    constexpr int kSS = 4;  // 4x4 subsamples per pixel
    const double inv_res = 1.0 / resolution;
    for (int py = 0; py < resolution; ++py) {
        for (int px = 0; px < resolution; ++px) {
            double acc[3] = {0, 0, 0};
            for (int sy = 0; sy < kSS; ++sy) {
                for (int sx = 0; sx < kSS; ++sx) {
                    const double x = (px + (sx + 0.5) / kSS) * inv_res;
                    const double y = (py + (sy + 0.5) / kSS) * inv_res;
                    std::array<double, 3> c = bg;
                    for (const PlacedShape& s : scene.shapes)
                        if (point_in_shape(s, x, y)) c = style_color(style_entry(s.style_id), x, y);
                    acc[0] += c[0];
                    acc[1] += c[1];
                    acc[2] += c[2];
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                const double v = acc[ch] / (kSS * kSS);
                // quantize to the 8-bit grid so PNG round-trips are exact
                image.at(ch, py, px) = std::lround(v * 255.0) / 255.0;
            }
        }
    }
    return image;
}

PairedSample sample_pair(std::uint64_t rng_seed, ConceptKind kind) {
    Rng rng = substream(rng_seed, Stream::dataset_sample, static_cast<std::uint64_t>(kind));

    // Draw each scene's three axis values; overwrite the shared axis.
    int ref_shape = rng.below_int(kNumShapes);
    int tar_shape = rng.below_int(kNumShapes);
    int ref_style = rng.below_int(kNumStyles);
    int tar_style = rng.below_int(kNumStyles);
    int ref_layout = rng.below_int(kNumLayouts);
    int tar_layout = rng.below_int(kNumLayouts);
    const int ref_bg = rng.below_int(kNumBackgrounds);
    const int tar_bg = rng.below_int(kNumBackgrounds);
    // Secondary shapes for two-slot layouts, drawn unconditionally so the
    // stream layout does not depend on the layout draw.
    const int ref_shape2 = rng.below_int(kNumShapes);
    const int tar_shape2 = rng.below_int(kNumShapes);

    PairedSample sample;
    sample.seed = rng_seed;
    sample.shared_kind = kind;
    switch (kind) {
        case ConceptKind::Content:
            tar_shape = ref_shape;
            sample.shared_value = ref_shape;
            break;
        case ConceptKind::Style:
            tar_style = ref_style;
            sample.shared_value = ref_style;
            break;
        case ConceptKind::Composition:
            tar_layout = ref_layout;
            sample.shared_value = ref_layout;
            break;
    }

    sample.ref_scene = make_scene({ref_shape, ref_shape2}, ref_style, ref_layout, ref_bg);
    sample.tar_scene = make_scene({tar_shape, tar_shape2}, tar_style, tar_layout, tar_bg);
    sample.guidance = guidance_tokens(sample);
    return sample;
}

PairedSample render_pair(std::uint64_t rng_seed, ConceptKind kind, int resolution) {
    PairedSample sample = sample_pair(rng_seed, kind);
    sample.ref_image = render_scene(sample.ref_scene, resolution);
    sample.tar_image = render_scene(sample.tar_scene, resolution);
    return sample;
}

std::vector<std::string> guidance_tokens(const PairedSample& sample) {
    switch (sample.shared_kind) {
        case ConceptKind::Content:
            return {shape_name(sample.ref_scene.shape_class())};
        case ConceptKind::Style:
            return {"style"};
        case ConceptKind::Composition:
            return {"composition"};
    }
    throw std::invalid_argument("guidance_tokens: bad kind");
}

Dataset make_dataset(std::uint64_t seed, int pairs_per_kind, int resolution) {
    if (pairs_per_kind <= 0)
        throw std::invalid_argument("make_dataset: pairs_per_kind must be positive");
    Dataset d;
    d.resolution = resolution;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < pairs_per_kind; ++i) {
            Rng r = substream(seed, Stream::dataset_sample, static_cast<std::uint64_t>(k),
                              static_cast<std::uint64_t>(i));
            d.samples.push_back(
                render_pair(r.next_u64(), static_cast<ConceptKind>(k), resolution));
        }
    return d;
}

void write_manifest(const std::vector<PairedSample>& samples, int resolution,
                    const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(directory) / "images");

    std::ofstream manifest(fs::path(directory) / "manifest.jsonl");
    if (!manifest) throw std::runtime_error("write_manifest: cannot open manifest in " + directory);

    for (const PairedSample& s : samples) {
        const std::string stem =
            "images/" + std::string(kind_name(s.shared_kind)) + "_" + std::to_string(s.seed);
        const std::string ref_rel = stem + "_ref.png";
        const std::string tar_rel = stem + "_tar.png";
        write_png((fs::path(directory) / ref_rel).string(), s.ref_image);
        write_png((fs::path(directory) / tar_rel).string(), s.tar_image);
        manifest << nlohmann::json{{"seed", s.seed},
                                   {"kind", kind_name(s.shared_kind)},
                                   {"shared_value", s.shared_value},
                                   {"resolution", resolution},
                                   {"ref", ref_rel},
                                   {"tar", tar_rel}}
                        .dump()
                 << "\n";
    }
    if (!manifest.good()) throw std::runtime_error("write_manifest: write failure in " + directory);
}

Dataset read_manifest(const std::string& directory) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(directory) / "manifest.jsonl";
    std::ifstream manifest(manifest_path);
    if (!manifest)
        throw std::runtime_error("read_manifest: cannot open " + manifest_path.string());

    Dataset dataset;
    std::string line;
    int line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("read_manifest: bad JSON at " + manifest_path.string() +
                                     " line " + std::to_string(line_no) + ": " + e.what());
        }
        const int res = j.at("resolution").get<int>();
        if (dataset.resolution == 0) dataset.resolution = res;
        if (res != dataset.resolution)
            throw std::runtime_error("read_manifest: mixed resolutions at line " +
                                     std::to_string(line_no));
        const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
        const ConceptKind kind = kind_from_name(j.at("kind").get<std::string>());
        PairedSample s = sample_pair(seed, kind);
        if (s.shared_value != j.at("shared_value").get<int>())
            throw std::runtime_error("read_manifest: shared_value mismatch at line " +
                                     std::to_string(line_no) +
                                     " (dataset written with different tables?)");
        for (const char* key : {"ref", "tar"}) {
            const fs::path img_path = fs::path(directory) / j.at(key).get<std::string>();
            if (!fs::exists(img_path))
                throw std::runtime_error("read_manifest: missing image " + img_path.string() +
                                         " (line " + std::to_string(line_no) + ")");
            Tensor img = read_png(img_path.string());
            if (img.height() != dataset.resolution || img.width() != dataset.resolution)
                throw std::runtime_error("read_manifest: wrong image size in " + img_path.string());
            (key[0] == 'r' ? s.ref_image : s.tar_image) = std::move(img);
        }
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

}  // namespace disen
