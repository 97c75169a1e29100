#include "cmelr/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace cmelr;

TEST_CASE("philox4x32-10 known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("inverse normal cdf quantiles") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(inverse_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-14));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  for (double u : {1e-300, 1e-12, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-12}) {
    const double x = inverse_normal_cdf(u);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(u).epsilon(1e-12));
  }
}

TEST_CASE("normal stream is a pure function of seed, stream and counter") {
  const NormalStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  CHECK(a.normal_pair(11) == b.normal_pair(11));
  CHECK(a.normal_pair(11) != c.normal_pair(11));
  CHECK(a.normal_pair(11) != d.normal_pair(11));
  CHECK(a.normal_pair(11) != a.normal_pair(12));
}

TEST_CASE("normal stream moments") {
  const NormalStream s(123, 0);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0, cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [z1, z2] = s.normal_pair(static_cast<std::uint64_t>(i));
    m1 += z1 + z2;
    m2 += z1 * z1 + z2 * z2;
    cross += z1 * z2;
  }
  m1 /= 2 * n;
  m2 /= 2 * n;
  cross /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(2.0 * n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / (2.0 * n)));
  CHECK(std::abs(cross) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniforms lie strictly inside (0, 1)") {
  const NormalStream s(0, 0);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto [u1, u2] = s.uniform_pair(i);
    CHECK(u1 > 0.0);
    CHECK(u1 < 1.0);
    CHECK(u2 > 0.0);
    CHECK(u2 < 1.0);
  }
}
