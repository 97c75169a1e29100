#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace cmelr {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter-based: the output for a (key, counter) pair does not depend on how
// many numbers were drawn before it, so path-parallel simulation reproduces the
// serial stream exactly.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key) noexcept;
};

// Inverse of the standard normal CDF. Acklam's rational approximation refined
// by one Halley step against std::erfc; accurate to a few ulps on (0, 1).
double inverse_normal_cdf(double u) noexcept;

// Independent substream addressed by (seed, stream). Draw `counter` returns two
// standard normals and is a pure function of (seed, stream, counter).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::pair<double, double> normal_pair(std::uint64_t counter) const noexcept;
  std::pair<double, double> uniform_pair(std::uint64_t counter) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
};

}  // namespace cmelr
