#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace plmbo {

/// splitmix64 step; used to derive independent seeds from (seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Mix a base seed with a stream index (trial, tree, member, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (0x6a09e667f3bcc909ull + stream));
}

/// Seeded random source. The generator is std::mt19937_64 (a fully specified
/// algorithm, identical on every platform); the uniform/normal/bounded-int
/// transforms below are implemented here rather than taken from
/// std::*_distribution, whose output is unspecified and differs across
/// standard libraries. Same seed, same draw sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in the open interval (0, 1).
    double uniform_open01() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; one pair per two draws, cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /// Fisher-Yates shuffle of the first `count` positions of v (partial when
    /// count < v.size()); draws are index-order deterministic.
    template <typename T>
    void partial_shuffle(std::vector<T>& v, std::size_t count) {
        const std::size_t n = v.size();
        if (count > n) count = n;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace plmbo
