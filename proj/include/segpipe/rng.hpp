#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace segpipe {

// Counter-based generator: output n is a pure function of (key, n), so any
// voxel/field can be drawn independently of evaluation order. The mixer is the
// splitmix64 finalizer over key + (n+1)*golden-gamma, the same construction as
// SplittableRandom.
struct CounterRng {
    std::uint64_t key = 0;

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    explicit CounterRng(std::uint64_t seed) : key(mix(seed + kGamma)) {}

    // Independent substream, e.g. one per case or per field.
    CounterRng stream(std::uint64_t stream_id) const {
        CounterRng r(0);
        r.key = mix(key ^ mix(stream_id + kGamma));
        return r;
    }

    std::uint64_t bits(std::uint64_t counter) const { return mix(key + (counter + 1) * kGamma); }

    // [0, 1)
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    double uniform(std::uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform(counter);
    }

    // inclusive bounds
    std::int64_t uniform_int(std::uint64_t counter, std::int64_t lo, std::int64_t hi) const {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(bits(counter) % span);
    }

    // Standard normal via Box-Muller; consumes counters 2n and 2n+1.
    double gaussian(std::uint64_t counter) const {
        const double u1 = 1.0 - uniform(2 * counter);     // (0, 1]
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

} // namespace segpipe
