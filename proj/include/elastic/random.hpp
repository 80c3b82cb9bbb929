#pragma once

// Counter-based random numbers (Philox4x32-10) and portable samplers.
//
// Every draw is a pure function of (key, counter), so a workload can be
// regenerated draw-for-draw by any implementation that follows the stream
// layout documented in workload.hpp. The samplers below avoid the standard
// library distributions, whose algorithms are implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace elastic {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Two uniforms in [0, 1) with 53-bit resolution from one Philox block.
struct UniformPair {
  double first;
  double second;
};

inline UniformPair uniforms(std::uint64_t seed, std::uint32_t tag, std::uint32_t stream,
                            std::uint32_t index, std::uint32_t sub) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::generate({tag, stream, index, sub}, key);
  const auto to_unit = [](std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  };
  return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
}

/// Poisson(mean) by sequential inversion of the CDF with one uniform.
inline std::uint32_t poisson_from_uniform(double mean, double u) {
  if (!(mean >= 0.0) || mean > 700.0) throw std::domain_error("poisson mean must be in [0, 700]");
  if (mean == 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  std::uint32_t k = 0;
  while (u >= cdf) {
    ++k;
    p *= mean / k;
    const double next = cdf + p;
    if (next == cdf && static_cast<double>(k) > mean) break;  // tail below resolution
    cdf = next;
  }
  return k;
}

/// Exponential with the given mean by inversion.
inline double exponential_from_uniform(double mean, double u) { return -mean * std::log1p(-u); }

}  // namespace elastic
