#pragma once

// Staged two-branch training. Branch A reconstructs the target image from its
// (concept-masked) prompt plus the concept extracted from the reference;
// Branch B reconstructs the reference from its masked prompt plus the
// combination [anti(ref), main(tar)]. The contrastive term couples the three
// pooled representations. Warmup runs Branch A alone with no contrastive term.
//
// Replay/resume contract: every random draw is a pure function of
// (config seed, Stream, step, slot), so resuming from a checkpoint at step k
// reproduces an uninterrupted run bit-identically.

#include <cstdint>
#include <string>
#include <vector>

#include "disen/cod.hpp"
#include "disen/denoiser.hpp"
#include "disen/diffusion.hpp"
#include "disen/encode.hpp"
#include "disen/extractor.hpp"
#include "disen/model.hpp"
#include "disen/procgen.hpp"

namespace disen {

struct TrainConfig {
    int warmup_steps = 500;
    int main_steps = 3000;
    int batch_size = 8;
    int timesteps = 1000;  // diffusion T
    double lr_a = 1e-4;    // encoders, extractor, denoiser trunk
    double lr_b = 1e-5;    // adapter projections W'_k / W'_v
    double lambda = 0.05;  // contrastive weight (see decisions ledger)
    ContrastiveVariant variant = ContrastiveVariant::COD;
    double mu_train = 1.0;
    double cond_dropout = 0.1;
    std::uint64_t seed = 0;
    std::string dataset_dir;
    int checkpoint_interval = 500;

    int total_steps() const { return warmup_steps + main_steps; }
    void validate() const;
};

// Every trainable component plus the registry that fixes parameter order.
// Non-copyable: the registry stores pointers into the member structs.
struct ModelParams {
    ModelConfig cfg;
    EncoderParams enc;
    ExtractorParams ext;
    DenoiserParams den;
    ad::ParamRegistry reg;

    ModelParams(const ModelConfig& c, std::uint64_t seed);
    ModelParams(const ModelParams&) = delete;
    ModelParams& operator=(const ModelParams&) = delete;
};

// Decoupled-weight-decay adaptive-moment optimizer (the paper's family).
struct OptConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
};

struct OptState {
    std::vector<Tensor> m, v;  // one buffer per registered param
    std::int64_t t = 0;

    explicit OptState(const ad::ParamRegistry& reg) : m(reg.make_buffers()), v(reg.make_buffers()) {}
};

// One update of w[i] -= lr[i] * (m_hat / (sqrt(v_hat) + eps) + wd * w[i]).
void adamw_step(ad::ParamRegistry& reg, const std::vector<Tensor>& grads,
                const std::vector<double>& lr, OptState& st, const OptConfig& oc);

// Per-parameter learning rates: lr_a everywhere, lr_b on the adapter ids.
std::vector<double> learning_rates(const ModelParams& mp, const TrainConfig& tc);

struct StepMetrics {
    std::int64_t step = 0;
    bool warmup = false;
    double loss_a = 0.0, loss_b = 0.0, contrastive = 0.0, total = 0.0;
};

// Forward/backward of the batch-mean objective at a given step; accumulates
// parameter gradients into `grads` and returns the loss components. During
// warmup only Branch A runs and the contrastive term is absent.
StepMetrics accumulate_gradients(const std::vector<const PairedSample*>& batch, ModelParams& mp,
                                 const TrainConfig& tc, const NoiseSchedule& sched,
                                 std::int64_t step, bool warmup, std::vector<Tensor>& grads);

// accumulate_gradients + one optimizer update.
StepMetrics train_step(const std::vector<const PairedSample*>& batch, ModelParams& mp,
                       const TrainConfig& tc, const NoiseSchedule& sched, std::int64_t step,
                       bool warmup, OptState& opt);

// --- checkpoints -----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams& mp, const OptState& opt,
                     std::int64_t step, std::uint64_t config_hash);

struct CheckpointInfo {
    std::int64_t step = 0;
    std::uint64_t config_hash = 0;
};

// Loads weights and moments into an already-constructed ModelParams whose
// registry matches the file (count and shapes checked). The caller compares
// config_hash and warns on mismatch.
CheckpointInfo load_checkpoint(const std::string& path, ModelParams& mp, OptState& opt);

// --- full runs ----------------------------------------------------------------------

struct RunResult {
    std::int64_t final_step = 0;
    std::string checkpoint_path;
    std::vector<StepMetrics> metrics;
};

// Executes warmup then main stage, appending one JSONL metrics line per step
// to out_dir/metrics.jsonl and writing out_dir/ckpt_{step}.bin at the
// checkpoint interval and at the end. `resume_checkpoint` continues a prior
// run from its saved step. `log`, when non-null, receives progress lines.
RunResult run(const TrainConfig& tc, const ModelConfig& mc, const Dataset& data,
              const std::string& out_dir, std::uint64_t config_hash = 0,
              const std::string& resume_checkpoint = "", std::ostream* log = nullptr);

}  // namespace disen
