#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seed-derivation helpers.  Every stochastic routine in the library derives
// its own engine from a user-visible seed plus fixed stream tags, so results
// are reproducible bit-for-bit regardless of call order, thread count, or
// which subset of the pipeline runs.

namespace qmig {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche, cheap, and stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mix an arbitrary list of stream tags into a base seed.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
    std::uint64_t s = splitmix64(base);
    ((s = splitmix64(s ^ static_cast<std::uint64_t>(tags))), ...);
    return s;
}

template <typename... Tags>
Rng make_rng(std::uint64_t base, Tags... tags) {
    return Rng(derive_seed(base, tags...));
}

// The draws below avoid std::*_distribution on purpose: the standard leaves
// those algorithms implementation-defined, and every byte of generated data
// is part of this project's determinism contract.

// Uniform double in [0, 1), 53 random bits.
inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (no state, one value per call).
inline double next_normal(Rng& rng) {
    // Offset keeps the log argument strictly positive.
    double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = next_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Uniform index in [0, n).
inline std::size_t next_index(Rng& rng, std::size_t n) {
    std::size_t i = static_cast<std::size_t>(next_unit(rng) * static_cast<double>(n));
    return i >= n ? n - 1 : i;
}

// Poisson by inversion; fine for the small means used here.
inline int next_poisson(Rng& rng, double lambda) {
    double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= next_unit(rng);
    } while (p > l);
    return k - 1;
}

// Fisher-Yates with the portable uniform index draw.
template <typename T>
void shuffle_portable(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = next_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace qmig
