#include <doctest.h>

#include <cmath>
#include <vector>

#include "rng.hpp"

using namespace decoupler;

TEST_CASE("Philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  Stream a(42, Domain::Theta, 3, 1), b(42, Domain::Theta, 3, 1), c(42, Domain::Theta, 3, 2), d(43, Domain::Theta, 3, 1);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u32();
    CHECK(x == b.next_u32());
    same_c += x == c.next_u32();
    same_d += x == d.next_u32();
  }
  CHECK(same_c < 3);
  CHECK(same_d < 3);
}

TEST_CASE("fill_normal is reproducible and has unit moments") {
  Stream a(9, Domain::Test, 0), b(9, Domain::Test, 0);
  std::vector<double> x(200000), y(1000);
  a.fill_normal(x.data(), x.size());
  b.fill_normal(y.data(), y.size());
  for (int i = 0; i < 1000; ++i) CHECK(x[i] == y[i]);
  double m = 0, v = 0, k4 = 0;
  for (double z : x) {
    m += z;
    v += z * z;
    k4 += z * z * z * z;
  }
  const double n = double(x.size());
  m /= n;
  v /= n;
  k4 /= n;
  CHECK(std::abs(m) < 4.0 / std::sqrt(n));
  CHECK(std::abs(v - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(k4 - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("fill_normal scale and tail frequency") {
  Stream a(10, Domain::Test, 1);
  std::vector<double> x(400000);
  a.fill_normal(x.data(), x.size(), 2.0);
  std::size_t tail = 0;
  for (double z : x) tail += std::abs(z) > 2.0 * 3.0;
  // P(|Z| > 3) = 0.0026998
  const double p = 0.0026997960632601866, n = double(x.size());
  CHECK(std::abs(double(tail) - p * n) < 4.0 * std::sqrt(p * n));
}

TEST_CASE("uniform is in the open unit interval") {
  Stream a(1, Domain::Test, 2);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = a.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}
