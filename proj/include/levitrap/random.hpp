#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "levitrap/units.hpp"

namespace levitrap {

/// SplitMix64 finaliser, used as a keyed counter-based hash.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream key from a parent key and an index.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream: draw(n) depends only on (key, n), so any
/// sample can be regenerated without replaying the stream. Portable and
/// bit-reproducible across platforms (no std distributions involved).
class CounterRng {
  public:
    constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t key() const noexcept { return key_; }

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ ^ mix64(counter));
    }

    /// Uniform on the open interval (0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Pair of independent standard normals (Box-Muller) for a counter.
    std::pair<double, double> normal_pair(std::uint64_t counter) const noexcept {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * constants::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    double normal(std::uint64_t counter) const noexcept { return normal_pair(counter).first; }

  private:
    std::uint64_t key_;
};

/// Sequential convenience wrapper over a counter stream.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) noexcept : rng_(key) {}
    // High counter bit keeps uniforms disjoint from the Box-Muller counters.
    double uniform() noexcept { return rng_.uniform((1ULL << 63) | counter_++); }
    double normal() noexcept {
        if (spare_) {
            spare_ = false;
            return cached_;
        }
        auto [a, b] = rng_.normal_pair(counter_++);
        cached_ = b;
        spare_ = true;
        return a;
    }

  private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool spare_ = false;
};

}  // namespace levitrap
