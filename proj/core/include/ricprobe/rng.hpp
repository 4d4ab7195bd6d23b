#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ricprobe {

// Counter-based random numbers.
//
// Every Monte Carlo path owns a stream keyed by (master_seed, path_index), and
// nested simulations derive child streams keyed by (path_key, knot, replicate).
// Streams never share state, so an ensemble is bit-identical for any worker
// count and any evaluation order.
//
// Generator: Philox4x32-10. One block of the keyed counter sequence yields
// 128 bits; these are consumed as two 64-bit uniforms mapped to (0,1) via
// u = (w + 1/2) * 2^-64 and turned into a Box-Muller pair
//   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2).
// This transform is part of the reproducibility contract; do not swap it for
// a ziggurat or change the uniform mapping without bumping report schemas.

namespace detail {

inline constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 2> key,
                                             std::array<uint32_t, 4> ctr) {
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * ctr[2];
    const std::array<uint32_t, 4> next = {
        static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
        static_cast<uint32_t>(p1),
        static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
        static_cast<uint32_t>(p0),
    };
    ctr = next;
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Key derivation: a two-step splitmix chain keeps distinct (seed, index) pairs
// on distinct 64-bit keys with negligible collision probability.
inline uint64_t derive_stream_key(uint64_t seed, uint64_t index) {
  return detail::splitmix64(detail::splitmix64(seed ^ 0x8AFB'41C6'9A2Du) + index);
}

inline uint64_t path_stream_key(uint64_t master_seed, uint64_t path_index) {
  return derive_stream_key(master_seed, path_index);
}

inline uint64_t child_stream_key(uint64_t path_key, uint64_t knot, uint64_t replicate) {
  return derive_stream_key(derive_stream_key(path_key, knot + 1), replicate);
}

// Deterministic stream of standard normal draws.
class NormalStream {
 public:
  explicit NormalStream(uint64_t key)
      : key_{static_cast<uint32_t>(key), static_cast<uint32_t>(key >> 32)} {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto block = detail::philox4x32_10(
        key_, {static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32), 0u, 0u});
    ++counter_;
    const uint64_t w0 = (static_cast<uint64_t>(block[0]) << 32) | block[1];
    const uint64_t w1 = (static_cast<uint64_t>(block[2]) << 32) | block[3];
    const double u1 = (static_cast<double>(w0) + 0.5) * 0x1p-64;
    const double u2 = (static_cast<double>(w1) + 0.5) * 0x1p-64;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Raw 64-bit word stream sharing the same counter space (used for hashing
  // and shuffling utilities, not for Gaussian draws).
  uint64_t next_u64() {
    const auto block = detail::philox4x32_10(
        key_, {static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32), 1u, 0u});
    ++counter_;
    return (static_cast<uint64_t>(block[0]) << 32) | block[1];
  }

 private:
  std::array<uint32_t, 2> key_;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ricprobe
