#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <span>

namespace cvarplan {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
    return Rng(seq);
}

/// Independent stream for (seed, index); used to give every evaluation
/// episode its own reproducible generator.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xd1342543de82ef95ULL * (stream + 1));
    return make_rng(splitmix64(s));
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    assert(n > 0);
    // multiply-shift bounded draw; bias is negligible for the small n used here
    return static_cast<std::size_t>((static_cast<__uint128_t>(rng()) * n) >> 64);
}

inline double gamma_sample(Rng& rng, double shape) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(rng);
}

/// Draw from Dirichlet(alpha) via normalized gammas.
inline void dirichlet_sample(std::span<const double> alpha, std::span<double> out, Rng& rng) {
    assert(alpha.size() == out.size() && !alpha.empty());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = gamma_sample(rng, alpha[i]);
        total += out[i];
    }
    if (total <= 0.0) {
        // all-zero draw is possible only for tiny concentrations; fall back to uniform
        for (auto& v : out) v = 1.0 / static_cast<double>(out.size());
        return;
    }
    for (auto& v : out) v /= total;
}

inline double beta_sample(Rng& rng, double a, double b) {
    const double x = gamma_sample(rng, a);
    const double y = gamma_sample(rng, b);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
}

/// Sample an index from unnormalized nonnegative weights.
template <typename Accessor>
std::size_t sample_categorical(std::size_t n, double total, Accessor&& weight, Rng& rng) {
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        u -= weight(i);
        if (u < 0.0) return i;
    }
    return n - 1;
}

}  // namespace cvarplan
