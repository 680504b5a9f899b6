#pragma once

// Portable seeded generators. Both algorithms are fully specified by their
// published reference implementations, so sessions can be reproduced by any
// language that implements the same integer arithmetic:
//   SplitMix64  (Steele, Lea, Flood 2014)  -- seed expansion and subseeds
//   xoshiro256** (Blackman, Vigna 2018)    -- stream generator
// Normal deviates use the basic Box-Muller transform with the second deviate
// of each pair cached.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace neckcheck {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Subseed for a named stream of a session: SplitMix64(seed ^ mix(stream_id)).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    SplitMix64 mixer(stream_id * 0xD1B54A32D192ED03ULL + 1);
    SplitMix64 sm(seed ^ mixer.next());
    return sm.next();
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& word : s_) word = sm.next();
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by multiply-shift on the top 32 bits (n < 2^32).
    std::uint64_t below(std::uint64_t n) { return (((*this)() >> 32) * n) >> 32; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace neckcheck
