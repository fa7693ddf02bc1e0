#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input raster/config validation failures.
struct DimensionError : Error {
    using Error::Error;
};
struct ParameterError : Error {
    using Error::Error;
};
// Empty mask / empty contour list: no gesture present in the frame.
struct NoHandError : Error {
    using Error::Error;
};
// Bad dataset root, unreadable files, malformed artifacts.
struct InputError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct DegenerateSampleError : Error {
    using Error::Error;
};
struct TrainingDivergedError : Error {
    using Error::Error;
};
struct MissingArtifactError : Error {
    using Error::Error;
};

// All randomness flows through mt19937_64, whose output sequence is fixed by
// the standard. Distribution helpers are hand-rolled below because the
// std::*_distribution adapters are not portable across library vendors.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stable per-member seed: the same base seed and index always map to the
// same stream regardless of how many members run or in what order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ (0x9E3779B97F4A7C15ull * (index + 1)));
}

// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    if (n == 0) throw ParameterError("uniform_below: n must be positive");
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Fisher-Yates with the portable integer sampler above; std::shuffle is
// implementation-defined and would break cross-platform reproducibility.
template <typename T>
void portable_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gr
