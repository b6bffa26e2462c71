#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace islt {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += W0;
        key[1] += W1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }
};

// Uniform on the open interval (0, 1).
inline double to_unit(std::uint32_t x) { return (static_cast<double>(x) + 0.5) * 0x1.0p-32; }

// Two standard normals from two uniforms (Box-Muller).
inline std::array<double, 2> box_muller(std::uint32_t a, std::uint32_t b) {
  const double r = std::sqrt(-2.0 * std::log(to_unit(a)));
  const double th = 2.0 * M_PI * to_unit(b);
  return {r * std::cos(th), r * std::sin(th)};
}

}  // namespace islt
