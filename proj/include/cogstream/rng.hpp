#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace cogstream {

// Seeded generator whose output is identical on every platform: the engine
// is std::mt19937_64 (sequence fixed by the standard) and the distributions
// below are implemented here instead of using the implementation-defined
// std:: distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01();

    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

    // Index drawn with probability proportional to weights[i]. Weights must be
    // non-negative with a positive sum.
    std::size_t categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

// Mixes a base seed with a stream index (splitmix64 finalizer) so derived
// generators are decorrelated and reproducible.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace cogstream
