#pragma once

// Quantitative disentanglement evaluation: cosine statistics over pooled
// concept representations, renderer-oracle concept probes on generated
// images, and mu/omega sweeps. The probes exploit the closed world of the
// procedural renderer: every content/style/layout value has a known template,
// so classification needs no learned components.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "disen/diffusion.hpp"
#include "disen/procgen.hpp"
#include "disen/trainloop.hpp"

namespace disen {

// --- renderer-oracle probes ---------------------------------------------------

// Detected concept values of one image; -1 marks an unclassifiable axis.
struct ProbeResult {
    int content = -1;
    int style = -1;
    int layout = -1;
};

// Classifies a [3,R,R] image in [0,1]. Background = per-channel median;
// style via near-white stripe fraction plus nearest mean-RGB palette entry;
// foreground = pixels beyond half the classified palette's background
// distance, which reproduces the renderer's coverage >= 8/16 rule exactly;
// content/layout via joint IoU argmax over per-(shape, layout) templates
// (ties break toward the lowest shape index). Near-flat images are
// unclassifiable (-1 on every axis).
ProbeResult probe_image(const Tensor& image);

int probe_value(const ProbeResult& r, ConceptKind kind);

// Chance accuracy of guessing a kind's value: 1/6 content, 1/8 style, 1/6 layout.
double probe_chance(ConceptKind kind);

// --- orthogonality statistics ---------------------------------------------------

using RepFn = std::function<Tensor(const PairedSample&)>;

struct PairStat {
    double mean_abs_cos = 0.0;
    double mean_cos = 0.0;
    double stddev = 0.0;  // of |cos|
    int count = 0;
};

struct OrthogonalityReport {
    std::array<std::array<PairStat, 3>, 3> pair{};  // symmetric in kind order
    std::array<int, 3> kind_counts{};

    double inter_mean_abs() const;  // pooled over the three cross-kind buckets
    double intra_mean_cos() const;  // pooled over the three within-kind buckets
    std::string to_json() const;
};

// Pairwise cosine statistics of rep(sample) grouped by shared kind.
// Requires at least `min_per_kind` samples of every kind.
OrthogonalityReport orthogonality_report(const std::vector<PairedSample>& eval_set,
                                         const RepFn& rep, int min_per_kind = 30);

// Pooled main-query representation of a sample's (reference, guidance).
Tensor pooled_rep(const PairedSample& s, const EncoderParams& enc, const ExtractorParams& ext,
                  const ModelConfig& cfg);

// Freshly rendered evaluation set: per_kind pairs of every kind.
std::vector<PairedSample> make_eval_set(std::uint64_t seed, int per_kind, int resolution);

// --- generation probes ---------------------------------------------------------------

struct ProbeTrialRow {
    std::uint64_t sample_seed = 0;
    int expected = -1;
    int detected = -1;
    bool match = false;
};

struct ProbeReport {
    ConceptKind kind = ConceptKind::Content;
    int trials = 0;
    int matches = 0;
    double accuracy = 0.0;
    std::vector<ProbeTrialRow> rows;

    std::string to_json() const;
};

// For each trial: draw a fresh pair of `kind`, extract the concept from the
// reference, generate from the target's concept-masked prompt plus that
// concept, and compare the probed axis against the shared value.
ProbeReport probe_eval(const ModelParams& mp, ConceptKind kind, int trials,
                       const SamplerConfig& sampler, const NoiseSchedule& sched);

// --- sweeps -------------------------------------------------------------------------

enum class SweepParam { mu, omega };

SweepParam sweep_param_from_name(const std::string& name);

// probe_eval per value, overriding the chosen sampler field each row.
std::vector<ProbeReport> sweep(const ModelParams& mp, SweepParam param,
                               const std::vector<double>& values, ConceptKind kind, int trials,
                               const SamplerConfig& base, const NoiseSchedule& sched);

// Plot-ready CSV: one row per value with accuracy and trial count.
std::string sweep_csv(SweepParam param, const std::vector<double>& values,
                      const std::vector<ProbeReport>& reports);

}  // namespace disen
