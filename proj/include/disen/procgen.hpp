#pragma once

// Procedural paired-concept data. Every sample is a (reference, target) scene
// pair sharing exactly one concept axis — content (shape class), style
// (palette/texture), or composition (layout) — with the other two axes drawn
// independently. Rendering is a pure function of (scene, resolution), so a
// perfect concept oracle exists for every image this project ever trains on.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "disen/tensor.hpp"

namespace disen {

enum class ConceptKind { Content = 0, Style = 1, Composition = 2 };

const char* kind_name(ConceptKind k);
ConceptKind kind_from_name(const std::string& name);

// --- concept tables ----------------------------------------------------------

inline constexpr int kNumShapes = 6;
inline constexpr int kNumStyles = 8;
inline constexpr int kNumLayouts = 6;
inline constexpr int kNumBackgrounds = 4;

// Shape classes, index order fixed: circle, square, triangle, star, cross, ring.
const char* shape_name(int shape_class);

struct StyleEntry {
    const char* name;
    enum class Texture { solid, hstripe, vstripe } texture;
    std::array<double, 3> rgb_a;
    std::array<double, 3> rgb_b;  // second stripe color; unused for solid
};
const StyleEntry& style_entry(int style_id);

struct LayoutSlot {
    double cx, cy;  // center in normalized [0,1]² canvas coordinates
    double scale;   // shape bounding-box side as a fraction of the canvas
};
struct LayoutEntry {
    const char* name;
    int slots;  // 1 or 2
    std::array<LayoutSlot, 2> slot;
};
const LayoutEntry& layout_entry(int layout_id);

std::array<double, 3> background_rgb(int background_id);

// --- scenes -------------------------------------------------------------------

struct PlacedShape {
    int shape_class = 0;
    int style_id = 0;
    int layout_id = 0;
    double cx = 0.5, cy = 0.5;  // derived from (layout_id, slot)
    double scale = 0.5;
};

struct SceneDescription {
    std::vector<PlacedShape> shapes;  // 1..=2, geometry fixed by layout slots
    int background = 0;

    int layout_id() const { return shapes.at(0).layout_id; }
    int style_id() const { return shapes.at(0).style_id; }
    int shape_class() const { return shapes.at(0).shape_class; }  // slot-0 = content value
};

// Builds a scene from table indices; slot geometry comes from the layout table.
// Shape classes beyond the layout's slot count are ignored.
SceneDescription make_scene(const std::vector<int>& shape_classes, int style_id, int layout_id,
                            int background);

struct PairedSample {
    SceneDescription ref_scene, tar_scene;
    Tensor ref_image, tar_image;  // [3,R,R], filled by render_pair / dataset load
    std::vector<std::string> guidance;
    ConceptKind shared_kind = ConceptKind::Content;
    int shared_value = 0;
    std::uint64_t seed = 0;
};

// --- operations ----------------------------------------------------------------

// Deterministic anti-aliased rasterization (4x4 supersampling, box filter),
// quantized to the 8-bit grid so PNG round-trips are lossless.
Tensor render_scene(const SceneDescription& scene, int resolution);

// True if normalized canvas point (x,y) is inside the placed shape.
bool point_in_shape(const PlacedShape& shape, double x, double y);

// Scene pair sharing exactly `kind`; images not yet rendered.
PairedSample sample_pair(std::uint64_t rng_seed, ConceptKind kind);

// sample_pair + render both scenes at `resolution`.
PairedSample render_pair(std::uint64_t rng_seed, ConceptKind kind, int resolution);

std::vector<std::string> guidance_tokens(const PairedSample& sample);

// --- dataset on disk -------------------------------------------------------------

struct Dataset {
    std::vector<PairedSample> samples;
    int resolution = 0;
};

// Deterministic training dataset: pairs_per_kind pairs of every kind, pair
// seeds drawn from the dataset_sample stream of `seed`.
Dataset make_dataset(std::uint64_t seed, int pairs_per_kind, int resolution);

// Writes manifest.jsonl plus images/{seed}_{ref|tar}.png under `directory`.
void write_manifest(const std::vector<PairedSample>& samples, int resolution,
                    const std::string& directory);
// Loads every sample; scenes are re-derived from (seed, kind), pixels from PNG.
Dataset read_manifest(const std::string& directory);

}  // namespace disen
