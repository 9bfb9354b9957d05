#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pde_h.hpp"

using namespace decoupler;

TEST_CASE("linear family reproduces the closed form") {
  PdeConfig cfg;
  cfg.Q0 = 1.0;
  const auto H = solve_h([](double b) { return 0.25 * b * b; }, cfg);
  double worst = 0.0;
  for (int i = 0; i < H.field.nq; ++i)
    for (int j = 0; j < H.field.nb; ++j) {
      const double b = H.field.b(j), q = H.field.q(i);
      if (b == 0.0) continue;
      const double e = 0.25 * b * b / (1.0 - 0.25 * q);
      worst = std::max(worst, std::abs(H.field.at(i, j) - e) / e);
    }
  CHECK(worst <= 1e-3);
}

TEST_CASE("residual is second order in h") {
  const auto exact = [](double q, double b) { return 0.25 * (1.0 + b * b) / (1.0 - 0.25 * q); };
  double r[2];
  for (int k = 0; k < 2; ++k) {
    PdeConfig cfg;
    cfg.Q0 = 1.0;
    cfg.h_b = 1.0 / (64 << k);
    cfg.b_min = -2.0;
    cfg.b_max = 2.0;
    const auto H = solve_h([](double b) { return 0.25 * (1.0 + b * b); }, cfg);
    double worst = 0.0;
    for (int i = 0; i < H.field.nq; ++i)
      for (int j = 0; j < H.field.nb; ++j)
        worst = std::max(worst, std::abs(H.field.at(i, j) - exact(H.field.q(i), H.field.b(j))));
    r[k] = worst;
  }
  CHECK(r[0] / r[1] == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("residual check certifies an exact solution") {
  PdeConfig cfg;
  cfg.Q0 = 0.5;
  const auto H = hfield_from([](double q, double b) { return (1.0 + b * b) / (4.0 - q); }, cfg);
  const auto r = residual_check(H);
  CHECK(r.max_abs < 1e-6);
}

TEST_CASE("Fisher-Wright keeps H zero at 0 and 1") {
  PdeConfig cfg;
  cfg.Q0 = 2.0;
  cfg.b_min = -0.25;
  cfg.b_max = 1.25;
  cfg.kinks = {0.0, 1.0};
  cfg.boundary = "linear";
  const auto H = solve_h([](double b) { return b > 0.0 && b < 1.0 ? b * (1.0 - b) : 0.0; }, cfg);
  for (int i = 0; i < H.field.nq; ++i) {
    CHECK(std::abs(H.field.eval(H.field.q(i), 0.0)) <= 1e-8);
    CHECK(std::abs(H.field.eval(H.field.q(i), 1.0)) <= 1e-8);
  }
}

TEST_CASE("sqrt H Lipschitz respects the a priori bound on add_mult") {
  PdeConfig cfg;
  cfg.Q0 = 1.0;
  const auto H = solve_h([](double b) { return 0.36 * (1.0 + b * b); }, cfg);
  const auto lip = sqrt_h_lipschitz(H);
  for (std::size_t i = 0; i < lip.size(); ++i) {
    const double q = H.field.q(int(i));
    CHECK(lip[i] <= 1.05 / std::sqrt(1.0 / 0.36 - q));
  }
}
