#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace disen {

// Counter-based deterministic RNG (splitmix64 core). Every consumer derives
// its stream as a pure function of (seed, purpose, indices), so replay and
// resume never depend on hidden generator state.
namespace rng_detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27; z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
}  // namespace rng_detail

inline std::uint64_t hash_u64(std::uint64_t a) { return rng_detail::mix(a + rng_detail::kGolden); }

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return rng_detail::mix(a ^ (rng_detail::mix(b + rng_detail::kGolden) + 0x517CC1B727220A95ULL));
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(hash_u64(seed)) {}

    std::uint64_t next_u64() {
        state_ += rng_detail::kGolden;
        return rng_detail::mix(state_);
    }

    // [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    // Box-Muller without the cached spare: always consumes two draws, so the
    // stream position is a pure function of the call count.
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t state_;
};

// Stream purposes used across the project. Values are part of the replay
// contract: changing them changes every seeded run.
enum class Stream : std::uint64_t {
    param_init = 1,
    dataset_sample = 2,
    batch_indices = 3,
    noise_eps = 4,
    timestep = 5,
    cond_dropout = 6,
    sampler_init = 7,
    probe_trial = 8,
    eval_set = 9,
};

inline Rng substream(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
                     std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(purpose));
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    h = hash_combine(h, c);
    return Rng(h);
}

}  // namespace disen
