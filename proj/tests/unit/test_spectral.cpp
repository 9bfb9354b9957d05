#include <doctest.h>

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "spectral.hpp"

using namespace decoupler;

TEST_CASE("single Fourier mode is damped exactly") {
  const int n = 64;
  const double L = 5.0, tau = 0.3;
  SpectralGrid g(n, L);
  std::vector<double> f(g.real_size());
  const double k = 2.0 * std::numbers::pi / L;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f[std::size_t(i) * n + j] = std::cos(k * i * g.h());
  const auto out = heat_apply(g, f, tau);
  const double damp = std::exp(-0.5 * tau * k * k);
  double worst = 0.0;
  for (std::size_t t = 0; t < f.size(); ++t) worst = std::max(worst, std::abs(out[t] - damp * f[t]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("heat semigroup composes") {
  const int n = 32;
  SpectralGrid g(n, 3.0);
  std::vector<double> f(g.real_size());
  for (std::size_t t = 0; t < f.size(); ++t) f[t] = std::sin(0.37 * double(t)) + (t % 7 == 0 ? 1.0 : 0.0);
  const auto a = heat_apply(g, heat_apply(g, f, 0.1), 0.25);
  const auto b = heat_apply(g, f, 0.35);
  double worst = 0.0;
  for (std::size_t t = 0; t < f.size(); ++t) worst = std::max(worst, std::abs(a[t] - b[t]));
  CHECK(worst <= 1e-12);
  CHECK(heat_apply(g, f, 0.0) == f);
  CHECK_THROWS_AS(heat_apply(g, f, -1.0), Error);
}

TEST_CASE("heat_point agrees with heat_apply") {
  const int n = 16;
  SpectralGrid g(n, 2.0);
  std::vector<double> f(g.real_size());
  for (std::size_t t = 0; t < f.size(); ++t) f[t] = std::cos(1.3 * double(t)) * double(t % 5);
  RealBuffer in(g.real_size());
  ComplexBuffer fh(g.spec_size());
  std::copy(f.begin(), f.end(), in.data());
  g.forward(in.data(), fh.data());
  const auto full = heat_apply(g, f, 0.05);
  for (int ix : {0, 3, 11})
    for (int iy : {0, 5, 15}) CHECK(heat_point(g, fh.data(), 0.05, ix, iy) == doctest::Approx(full[std::size_t(ix) * n + iy]).epsilon(1e-12));
}

TEST_CASE("round trip and mass conservation") {
  SpectralGrid g(8, 1.0);
  RealBuffer a(g.real_size()), b(g.real_size());
  ComplexBuffer s(g.spec_size());
  double mass = 0.0;
  for (std::size_t t = 0; t < g.real_size(); ++t) mass += a[t] = double(t * t % 13);
  g.forward(a.data(), s.data());
  CHECK(s[0].real() == doctest::Approx(mass));
  g.inverse(s.data(), b.data());
  for (std::size_t t = 0; t < g.real_size(); ++t) CHECK(b[t] == doctest::Approx(a[t]));
  CHECK_THROWS_AS(SpectralGrid(7, 1.0), Error);
}
