// Deterministic PRNG and sampling routines.
//
// Everything that consumes randomness in this project goes through Rng so
// that a (config, master_seed) pair reproduces bit-identical results on any
// platform. std::shuffle / std::sample / std::*_distribution are
// implementation-defined, so the samplers are pinned here instead.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace coopnet {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a, used for trace hashing, certificate tie-breaking, and stream tags.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++ seeded through splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    // Independent stream derived from (base, tag, index). Streams with
    // distinct (tag, index) are uncorrelated regardless of draw order, which
    // is what makes per-peer and per-walk randomness order-independent.
    static Rng stream(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) {
        std::uint64_t sm = base;
        std::uint64_t a = splitmix64(sm) ^ (tag * 0x9e3779b97f4a7c15ULL);
        std::uint64_t b = splitmix64(sm) ^ (index * 0xd1b54a32d192ed03ULL);
        std::uint64_t mixed = a;
        std::uint64_t mixed2 = splitmix64(mixed) ^ b;
        return Rng(splitmix64(mixed2));
    }

    static Rng stream(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
        return stream(base, fnv1a64(tag.data(), tag.size()), index);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Unbiased uniform integer in [0, bound) via rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    double exponential(double mean) {
        // 1 - u keeps the argument strictly positive.
        return -mean * std::log(1.0 - uniform01());
    }

    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Log-normal parameterized by its median: exp(ln median + sigma * Z).
    double lognormal_median(double median, double sigma) {
        return median * std::exp(sigma * normal());
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), in ascending order (selection sampling).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        std::vector<std::size_t> out;
        if (k > n) k = n;
        out.reserve(k);
        std::size_t remaining = n;
        std::size_t needed = k;
        for (std::size_t i = 0; i < n && needed > 0; ++i) {
            if (below(remaining) < needed) {
                out.push_back(i);
                --needed;
            }
            --remaining;
        }
        return out;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

}  // namespace coopnet
