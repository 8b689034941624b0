#pragma once

#include <cstdint>
#include <vector>

#include "multigrad/tensor.hpp"

namespace multigrad {

// SplitMix64 finalizer: bijective 64-bit mixer with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

// Order-sensitive combine of a hash state with one more word.
constexpr std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    return mix64(h + 0x9e3779b97f4a7c15ULL + v);
}

// Counter-based deterministic RNG. A draw is a pure function of
// (seed, stream, counter), so streams are independent, reproducible across
// platforms, and cheap to fork. The one-stream sequence is SplitMix64.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), base_(hash_mix(mix64(seed), stream)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        return mix64(base_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    // Uniform double in [0, 1) with 53 bits of precision.
    double next_uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double next_normal();

    // Unbiased integer in [0, n) by rejection; n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    Tensor uniform(std::vector<std::size_t> shape);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

// Fisher-Yates shuffle driven by the stream.
void shuffle(std::vector<std::size_t>& items, RngStream& rng);

} // namespace multigrad
