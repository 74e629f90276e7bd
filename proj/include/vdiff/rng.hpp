#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every draw is a pure function of (key, counter), so streams can be split
// hierarchically without coordination and results never depend on evaluation
// order or parallel scheduling.

#include <array>
#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace vdiff {

namespace detail {

inline std::array<u32, 4> philox4x32(std::array<u32, 4> ctr, std::array<u32, 2> key) {
    constexpr u32 M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr u32 W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const u64 p0 = u64(M0) * ctr[0];
        const u64 p1 = u64(M1) * ctr[2];
        const u32 hi0 = u32(p0 >> 32), lo0 = u32(p0);
        const u32 hi1 = u32(p1 >> 32), lo1 = u32(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

}  // namespace detail

class Rng {
  public:
    Rng() : Rng(0) {}
    explicit Rng(u64 seed) : key_{u32(seed), u32(seed >> 32)} {}

    // Derives an independent child stream; children with distinct indices are
    // decorrelated regardless of how much either stream has been consumed.
    Rng split(u64 index) const {
        const auto block = detail::philox4x32(
            {u32(index), u32(index >> 32), 0x53504C49u, 0x54535452u}, key_);
        Rng child;
        child.key_ = {block[0], block[1]};
        return child;
    }

    u32 next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    u64 next_u64() {
        const u64 lo = next_u32();
        const u64 hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); n must be positive.
    i64 uniform_int(i64 n) {
        check_arg(n > 0, "uniform_int: n must be positive");
        return i64(next_u64() % u64(n));
    }

    // Standard normal via Box-Muller; generates pairs, caches the second.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        // u1 in (0,1] keeps the log finite.
        const double u1 = (double(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = double(next_u64() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(phi);
        have_cached_ = true;
        return r * std::cos(phi);
    }

  private:
    void refill() {
        const auto out = detail::philox4x32(
            {u32(counter_), u32(counter_ >> 32), 0, 0}, key_);
        buf_ = out;
        ++counter_;
        buf_pos_ = 0;
    }

    std::array<u32, 2> key_{0, 0};
    u64 counter_ = 0;
    std::array<u32, 4> buf_{};
    int buf_pos_ = 4;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace vdiff
