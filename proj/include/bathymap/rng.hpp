#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bathymap {

// SplitMix64 output function (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Stream derivation: the generator for sub-stream `index` of `seed` starts at
// state mix64(seed ^ mix64(index + gamma)). Used for per-tree, per-scene and
// per-stage streams so results never depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + kGoldenGamma));
}

// SplitMix64 generator. Every draw below is defined in terms of next() only,
// so the full stream is reproducible from this header in any language:
//   uniform()  = (next() >> 11) * 2^-53                      in [0, 1)
//   below(n)   = high 64 bits of the 128-bit product next()*n  in [0, n)
//   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2), u1 then u2 from uniform()
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t state) noexcept : state_(state) {}

  static constexpr Rng stream(std::uint64_t seed, std::uint64_t index) noexcept {
    return Rng(derive_seed(seed, index));
  }

  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace bathymap
