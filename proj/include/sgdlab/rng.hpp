#pragma once

// Counter-based random streams (Philox4x32-10). Every draw is a pure function
// of (seed, run, driver, step), so Monte Carlo batches reproduce exactly under
// any parallel schedule, and paired integrators can share a noise stream by
// construction.

#include <array>
#include <cmath>
#include <cstdint>

namespace sgdlab::rng {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
    constexpr std::uint64_t M0 = 0xD2511F53ull;
    constexpr std::uint64_t M1 = 0xCD9E8D57ull;
    const std::uint64_t p0 = M0 * ctr[0];
    const std::uint64_t p1 = M1 * ctr[2];
    const std::array<std::uint32_t, 4> out = {
        static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
        static_cast<std::uint32_t>(p0),
    };
    ctr = out;
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) philox_round(ctr, key);
    return ctr;
}

// 53-bit uniform in (0,1); never returns 0 so it is safe under log().
inline double u53_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1p-53;
}

} // namespace detail

// One logical substream of i.i.d. draws, addressed by step index.
class Stream {
  public:
    Stream() : k0_(0), k1_(0) {}
    Stream(std::uint64_t seed, std::uint64_t run, std::uint64_t driver) {
        std::uint64_t k = detail::splitmix64(seed);
        k = detail::splitmix64(k ^ run);
        k = detail::splitmix64(k ^ (driver + 0x51ED2701A9B5D3C4ull));
        k0_ = static_cast<std::uint32_t>(k);
        k1_ = static_cast<std::uint32_t>(k >> 32);
    }

    double uniform(std::uint64_t step) const {
        const auto r = block(step, 0);
        return detail::u53_open(r[0], r[1]);
    }

    // Standard normal via Box-Muller on the two uniforms of one Philox block.
    double normal(std::uint64_t step) const {
        const auto r = block(step, 1);
        const double u1 = detail::u53_open(r[0], r[1]);
        const double u2 = detail::u53_open(r[2], r[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::array<std::uint32_t, 4> block(std::uint64_t step, std::uint32_t lane) const {
        const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(step),
                                                  static_cast<std::uint32_t>(step >> 32), lane,
                                                  0x5EEDED01u};
        return detail::philox4x32_10(ctr, {k0_, k1_});
    }

    std::uint32_t k0_, k1_;
};

} // namespace sgdlab::rng
