#pragma once

#include <cstdint>

namespace atc {

/// 64-bit linear congruential generator (Knuth's MMIX constants). Each call
/// advances the state and returns its high 32 bits, so streams are identical
/// on every platform.
class Lcg64 {
public:
    static constexpr std::uint64_t multiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t increment = 1442695040888963407ULL;

    explicit constexpr Lcg64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ = state_ * multiplier + increment;
        return state_ >> 32;
    }

    /// Uniform real in [0, 1).
    constexpr double uniform() noexcept { return static_cast<double>(next()) / 4294967296.0; }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace atc
