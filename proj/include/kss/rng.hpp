#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure
// function of (key, counter), so results never depend on iteration order
// or on how work is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kss {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed for replicate `index` of a campaign with base seed `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

namespace detail {

inline Philox4x32Key key_of(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> normals_from_block(const Philox4x32Counter& out) {
  const std::uint64_t x = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t y = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double u1 = (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
  const double u2 = static_cast<double>(y >> 11) * 0x1.0p-53;          // [0,1)
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

}  // namespace detail

// Standard normal addressed by (seed, a, b, c): a pure function.
inline double normal_at(std::uint64_t seed, std::uint32_t a, std::uint64_t b, std::uint32_t c = 0) {
  const Philox4x32Counter ctr{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32), a,
                              c ^ 0xC0FFEE01u};
  return detail::normals_from_block(philox4x32_10(ctr, detail::key_of(seed)))[0];
}

// Sequential stream of normals/uniforms on a (seed, stream) pair.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream_a, std::uint32_t stream_b = 0)
      : key_(detail::key_of(seed)), a_(stream_a), b_(stream_b) {}

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto z = detail::normals_from_block(next_block());
    spare_ = z[1];
    have_spare_ = true;
    return z[0];
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    const auto out = next_block();
    const std::uint64_t x = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const { return counter_; }

 private:
  Philox4x32Counter next_block() {
    const Philox4x32Counter ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                a_, b_};
    ++counter_;
    return philox4x32_10(ctr, key_);
  }

  Philox4x32Key key_;
  std::uint32_t a_, b_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace kss
