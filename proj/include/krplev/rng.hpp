#pragma once

#include <cmath>
#include <cstdint>

namespace krplev {

// Counter-based generator: the n-th variate of a stream is a pure function of
// (seed, stream, n), so independent streams can be handed to concurrent
// samplers and every draw sequence is reproducible from the seed alone.
// Each uniform() consumes exactly one counter step, which tests rely on to
// count variates.
class CounterRng {
public:
    CounterRng() : CounterRng(0, 0) {}
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) {
        key_ = mix(mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream + 0xbf58476d1ce4e5b9ull));
    }

    // Uniform draw in [0, 1).
    double uniform() {
        const std::uint64_t bits = mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; always consumes two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    // Number of uniform variates consumed so far.
    std::uint64_t draws() const { return counter_; }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 33;
        z *= 0xff51afd7ed558ccdull;
        z ^= z >> 33;
        z *= 0xc4ceb9fe1a85ec53ull;
        z ^= z >> 33;
        return z;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// Stable derivation of sub-seeds for nested deterministic phases
// (e.g. per-round, per-mode sampling inside ALS).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return CounterRng::mix(CounterRng::mix(seed ^ (a * 0xd6e8feb86659fd93ull)) + b);
}

}  // namespace krplev
