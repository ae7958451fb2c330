#pragma once

#include <cmath>
#include <cstdint>
#include <array>

namespace lamperti::rng {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter-based: the stream of any (seed, stream_id) pair is a pure function of
// the block counter, so replaying a path replays its randomness exactly and
// streams never collide across replicates or threads.
namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& c, std::uint32_t k0,
                         std::uint32_t k1) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::uint32_t k0, std::uint32_t k1) {
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, k0, k1);
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

class Stream {
public:
    Stream() : Stream(0, 0) {}
    Stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t s = seed;
        const std::uint64_t k = detail::splitmix64(s);
        key0_ = static_cast<std::uint32_t>(k);
        key1_ = static_cast<std::uint32_t>(k >> 32);
        ctr_[2] = static_cast<std::uint32_t>(stream_id);
        ctr_[3] = static_cast<std::uint32_t>(stream_id >> 32);
    }

    std::uint64_t next_u64() {
        if (buffered_ == 0) refill();
        --buffered_;
        const std::uint64_t v = buf_[buffered_];
        return v;
    }

    // Uniform on (0, 1), never 0 or 1.
    double next_double() {
        const std::uint64_t v = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(v) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the pair is cached, so the draw count
    // per call sequence is deterministic.
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double next_exponential(double rate) { return -std::log(next_double()) / rate; }

    // Poisson count by inversion; means in this project are O(1) per step.
    std::uint64_t next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double target = next_double();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (target > cdf && k < 1000000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

private:
    void refill() {
        auto block = detail::philox4x32(ctr_, key0_, key1_);
        buf_[0] = (std::uint64_t{block[0]} << 32) | block[1];
        buf_[1] = (std::uint64_t{block[2]} << 32) | block[3];
        buffered_ = 2;
        if (++ctr_[0] == 0) ++ctr_[1];  // low 64 bits of the counter
    }

    std::uint32_t key0_ = 0, key1_ = 0;
    std::array<std::uint32_t, 4> ctr_{0, 0, 0, 0};
    std::array<std::uint64_t, 2> buf_{0, 0};
    int buffered_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace lamperti::rng
