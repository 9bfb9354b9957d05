#include <doctest.h>

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "scales.hpp"

using namespace decoupler;
namespace sc = decoupler::scales;

TEST_CASE("log scale is submultiplicative at (3, 5)") {
  CHECK(sc::log_scale(15.0) == doctest::Approx(2.772588722239781));
  CHECK(sc::log_scale(15.0) <= sc::log_scale(3.0) + sc::log_scale(5.0));
  CHECK_THROWS_AS(sc::log_scale(-1.0), Error);
}

TEST_CASE("S and T are inverse") {
  const double rho = 1e-4;
  for (double tau : {1e-6, 1e-3, 1.0, 10.0}) {
    const double back = sc::t_rho(sc::s_rho(tau, rho), rho);
    CHECK(std::abs(back - tau) / tau <= 1e-12);
  }
  CHECK(sc::s_rho(1.0, 1.0) == doctest::Approx(1.0));
  CHECK(sc::t_rho(0.0, 0.01) == 0.0);
}

TEST_CASE("gamma_rho frozen values") {
  CHECK(sc::gamma_rho(1.0) == doctest::Approx(4.257868077724905).epsilon(1e-13));
  CHECK(sc::gamma_rho(1e-4) == doctest::Approx(1.168058877460911).epsilon(1e-13));
}

TEST_CASE("U and R are inverse on interior points") {
  const double t0 = 0.2, t1 = 1.3, rho = 1e-3;
  for (int k = 1; k < 100; ++k) {
    const double t = t0 + (t1 - t0) * k / 100.0;
    const double q = sc::time_change_u(t, t0, t1, rho);
    CHECK(std::abs(sc::time_change_r(q, t0, t1, rho) - t) / t <= 1e-12);
    CHECK(std::abs(sc::time_change_u(sc::time_change_r(q, t0, t1, rho), t0, t1, rho) - q) / q <= 1e-12);
  }
  CHECK(sc::time_change_u(t1, t0, t1, rho) == doctest::Approx(sc::s_rho(t1 - t0, rho)));
  CHECK_THROWS_AS(sc::time_change_u(2.0, t0, t1, rho), Error);
}

TEST_CASE("heat kernel squared identity at tau = 2, |x| = 1") {
  const double tau = 2.0;
  const std::array<double, 2> x{1.0, 0.0};
  const double lhs = std::pow(sc::heat_kernel(tau, x), 2);
  const double rhs = sc::heat_kernel(tau / 2.0, x) / (4.0 * std::numbers::pi * tau);
  CHECK(std::abs(lhs - rhs) <= 1e-14 * rhs);
}

TEST_CASE("kappa and nu frozen values") {
  CHECK(sc::kappa(4.0, 1e-4) == doctest::Approx(0.011787975102007213).epsilon(1e-12));
  CHECK(sc::nu(1e-4) == doctest::Approx(4.646821524388421).epsilon(1e-12));
  CHECK_THROWS_AS(sc::kappa(2.0, 1e-4), Error);
}

TEST_CASE("heat symbol") {
  CHECK(sc::heat_symbol(0.0, 7.0) == 1.0);
  CHECK(sc::heat_symbol(2.0, 1.0) == doctest::Approx(std::exp(-1.0)));
}
