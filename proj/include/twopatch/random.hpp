#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "twopatch/params.hpp"

namespace twopatch {

/// Random stream handed to every randomized operation.
using RandomStream = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Independent stream for replicate `index` under master `seed`.
/// Depends only on (seed, index), never on scheduling.
inline RandomStream derive_stream(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t a = detail::splitmix64(seed);
    const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return RandomStream(seq);
}

/// Draw from Binomial(n, p) with the exact binomial law.
///
/// Sequential inversion for n <= 64; above that the standard library's
/// rejection sampler.
inline int wf_sample(double p, int n, RandomStream& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvariantError("wf_sample: probability outside [0,1]");
    if (n < 0) throw InvariantError("wf_sample: negative trial count");
    if (p == 0.0 || n == 0) return 0;
    if (p == 1.0) return n;
    if (n > 64) return std::binomial_distribution<int>(n, p)(rng);

    const bool flip = p > 0.5;
    const double q = flip ? 1.0 - p : p;
    const double ratio = q / (1.0 - q);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double pmf = std::pow(1.0 - q, n);
    int j = 0;
    while (u >= pmf && j < n) {
        u -= pmf;
        pmf *= ratio * static_cast<double>(n - j) / static_cast<double>(j + 1);
        ++j;
    }
    return flip ? n - j : j;
}

}  // namespace twopatch
