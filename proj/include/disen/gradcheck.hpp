#pragma once

// Finite-difference verification of the analytic gradients. Five suites cover
// the loss heads (cod_loss, cd_loss), the extractor's pooled output, a
// denoiser dual cross-attention block, and the full train-step total on a
// micro model. Each suite reports its worst relative error against a central
// difference; the whole battery is deterministic in `seed` and runs in
// seconds.

#include <cstdint>
#include <string>
#include <vector>

namespace disen {

struct GradCheckResult {
    std::string name;
    int probes = 0;          // number of (parameter, entry) pairs tested
    double max_rel_err = 0;  // worst |analytic - fd| / max(floor, |fd|)
    double tolerance = 0;
    bool pass = false;
};

// Runs all five suites. Never throws on gradient mismatch; inspect `pass`.
std::vector<GradCheckResult> run_grad_checks(std::uint64_t seed);

}  // namespace disen
