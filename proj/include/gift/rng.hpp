#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gift {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// xoshiro256++ with splitmix64 seeding. Sampling transforms are implemented
// here rather than via <random> distributions so that every stream is
// bit-reproducible regardless of standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller; u1 shifted into (0, 1] so the log stays finite.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // [0, n); Lemire multiply-shift, bias is O(n / 2^64).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    static constexpr double pi = 3.141592653589793238462643383279502884;

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

// Stream derivation: every consumer names its purpose so independent parts of
// a run never share a stream and adding a consumer never shifts another's.
inline Rng derive_stream(std::uint64_t master, std::string_view tag,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t st = master;
    std::uint64_t h = splitmix64(st);
    st ^= fnv1a64(tag);
    h ^= splitmix64(st);
    st ^= 0x9e3779b97f4a7c15ull * (a + 1);
    h ^= splitmix64(st);
    st ^= 0xc2b2ae3d27d4eb4full * (b + 1);
    h ^= splitmix64(st);
    return Rng(h);
}

} // namespace gift
