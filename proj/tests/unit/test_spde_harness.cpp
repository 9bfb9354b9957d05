#include <doctest.h>

#include <cmath>
#include <cstring>

#include "errors.hpp"
#include "nonlinearity.hpp"
#include "rng.hpp"
#include "scales.hpp"
#include "spde_harness.hpp"
#include "spde_sim.hpp"

using namespace decoupler;

TEST_CASE("step counts") {
  CHECK(min_steps(1e-2, 1.0) == 400);
  CHECK(min_steps(1e-3, 1.0) == 4000);
  const auto s = nested_steps({1e-3, 3e-3, 1e-2}, 1.0);
  CHECK(s == std::vector<long>{4005, 1335, 445});
  CHECK(s[0] % s[1] == 0);
  CHECK(s[1] % s[2] == 0);
}

TEST_CASE("probe layout keeps its spacing on the torus") {
  const double L = 512 * max_spacing(1e-3), sp = std::sqrt(scales::nu(1e-3));
  const auto p = probe_layout(L, sp);
  CHECK(p.size() == 12);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      double dx = std::abs(p[i][0] - p[j][0]), dy = std::abs(p[i][1] - p[j][1]);
      dx = std::min(dx, L - dx);
      dy = std::min(dy, L - dy);
      CHECK(std::hypot(dx, dy) >= sp);
    }
}

TEST_CASE("lockstep runs use the summed union increments") {
  const double rho = 1e-2;
  SpectralGrid g(16, 16 * max_spacing(rho));
  const auto sigma = make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.5}});
  const long K = 6;
  std::vector<double> coarse;
  run_lockstep(g, sigma, Vec::Ones(1), {{rho, 0.01, 2 * K}, {rho, 0.01, K}}, 17, 2,
               [&](std::size_t r, const SpdeState& s) {
                 if (r == 1) coarse = s.field();
               });
  auto s = SpdeState::constant(g, rho, 0.01 / K, Vec::Ones(1));
  RealBuffer a(g.real_size()), b(g.real_size());
  for (long k = 0; k < K; ++k) {
    const double dt = 0.01 / (2 * K);
    Stream(17, Domain::Spde, 2, std::uint32_t(2 * k)).fill_normal(a.data(), a.size(), std::sqrt(dt) / g.h());
    Stream(17, Domain::Spde, 2, std::uint32_t(2 * k + 1)).fill_normal(b.data(), b.size(), std::sqrt(dt) / g.h());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    spde_step(s, sigma, a.data());
  }
  const auto direct = s.field();
  REQUIRE(coarse.size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) CHECK(coarse[i] == doctest::Approx(direct[i]).epsilon(1e-13));
}

TEST_CASE("quadratic coefficients and the deterministic moment") {
  double g2, g1, g0;
  REQUIRE(quadratic_coefficients(make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.5}}), &g2, &g1, &g0));
  CHECK(g2 == doctest::Approx(0.25));
  CHECK(g1 == doctest::Approx(0.0));
  CHECK(g0 == doctest::Approx(0.25));
  CHECK_FALSE(quadratic_coefficients(make_nonlinearity("fisher_wright", {{"alpha", 1.0}}), &g2, &g1, &g0));

  const double rho = 1e-2;
  SpectralGrid g(32, 32 * max_spacing(rho));
  CHECK(scheme_quadratic_moment(g, rho, max_dt(rho), 40, 0.7, 0.0, 0.0, 2.0) == doctest::Approx(2.0));
  // Linear sigma: E v^2 grows from a^2, compare with replicas of the stepped scheme.
  const auto lin = make_nonlinearity("linear", {{"beta", 0.8}});
  const double expect = scheme_quadratic_moment(g, rho, max_dt(rho), 40, 1.0, 0.64, 0.0, 0.0);
  const int reps = 100;
  std::vector<double> x(reps);
  for (int r = 0; r < reps; ++r) {
    auto s = SpdeState::constant(g, rho, max_dt(rho), Vec::Ones(1));
    for (int k = 0; k < 40; ++k) {
      Stream rng(8, Domain::Test, std::uint32_t(r), std::uint32_t(k));
      spde_step(s, lin, rng);
    }
    double acc = 0.0;
    for (double v : s.field()) acc += 0.64 * v * v;
    x[r] = acc / double(g.real_size());
  }
  double m = 0.0, ss = 0.0;
  for (double v : x) m += v;
  m /= reps;
  for (double v : x) ss += (v - m) * (v - m);
  CHECK(std::abs(m - expect) <= 3.0 * std::sqrt(ss / (reps - 1) / reps));
}

TEST_CASE("J_sigma_rho trivial cases") {
  JRhoConfig cfg;
  cfg.rhos = {1e-2};
  cfg.n = 32;
  cfg.replicas = 4;
  cfg.q = 0.5;
  auto r = estimate_j_sigma_rho(make_nonlinearity("constant", {{"c", 0.7}}), cfg);
  CHECK(r.rows[0].J_scalar == doctest::Approx(0.7));
  cfg.q = 0.0;
  cfg.a = Vec::Constant(1, 2.0);
  r = estimate_j_sigma_rho(make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.5}}), cfg);
  CHECK(r.rows[0].J_scalar == doctest::Approx(0.5 * std::sqrt(5.0)));
}

TEST_CASE("exponents of probe pairs") {
  const double rho = 1e-2;
  const ProbeSpec a{1.0, 0.0, 0.0, 0.0}, b{1.0, 0.0, 20.0, 0.0};
  CHECK(shared_exponent(a, a, rho) == doctest::Approx(probe_exponent(a, rho)));
  CHECK(probe_exponent(a, rho) == doctest::Approx(scales::s_rho(1.0, rho)));
  CHECK(shared_exponent(a, b, rho) < 1e-6);
  const ProbeSpec c{1.0, 0.0, 0.3, 0.0};
  CHECK(shared_exponent(a, c, rho) == doctest::Approx(shared_exponent(c, a, rho)));
  CHECK(shared_exponent(a, c, rho) > 0.0);
  CHECK(shared_exponent(a, c, rho) < probe_exponent(a, rho));
}

TEST_CASE("multipoint: identical probes and distant probes") {
  MultipointHarnessConfig mc;
  mc.rho = 1e-2;
  mc.n = 64;
  mc.replicas = 200;
  mc.ref_samples = 4000;
  mc.seed = 3;
  const double L = 64 * max_spacing(mc.rho);
  mc.probes = {{1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.5 * L, 0.5 * L}};
  const auto r = multipoint_harness(make_nonlinearity("constant", {{"c", 1.0}}), mc);
  CHECK(r.p(0, 1) == doctest::Approx(r.q_targets[0]));
  // Covariances are listed by pair (0,0), (0,1), (0,2), (1,1), (1,2), (2,2).
  CHECK(r.field_cov[1] == doctest::Approx(r.field_cov[0]));
  CHECK(std::abs(r.field_cov[2]) <= 3.0 * r.field_cov_se[2]);
  CHECK(r.cov_ok);
}

TEST_CASE("one-point harness with zero sigma") {
  OnePointConfig oc;
  oc.rhos = {1e-1, 5e-2};
  oc.n = 32;
  oc.replicas = 2;
  oc.ref_paths = 500;
  oc.ref_steps = 20;
  oc.a = 0.4;
  oc.require_certificate = false;
  const auto r = one_point_harness(make_nonlinearity("constant", {{"c", 0.0}}), oc);
  for (const auto& row : r.rows) CHECK(row.w2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("one-point harness, constant sigma matches the Gaussian W2") {
  OnePointConfig oc;
  oc.rhos = {1e-1};
  oc.n = 32;
  oc.replicas = 40;
  oc.ref_paths = 20000;
  oc.ref_steps = 20;
  oc.a = 0.0;
  oc.require_certificate = false;
  oc.seed = 12;
  const auto r = one_point_harness(make_nonlinearity("constant", {{"c", 1.0}}), oc);
  const auto& row = r.rows[0];
  CHECK(row.gaussian_w2 == doctest::Approx(1.0 - std::sqrt(scales::s_rho(1.0, 1e-1))));
  // Sampling noise of an empirical W2 at a few hundred samples.
  CHECK(std::abs(row.w2 - row.gaussian_w2) <= 0.1);
}

TEST_CASE("one-point harness: paired bootstrap of W2 steps") {
  OnePointConfig oc;
  oc.rhos = {1e-1, 5e-2};
  oc.n = 32;
  oc.replicas = 20;
  oc.ref_paths = 5000;
  oc.ref_steps = 20;
  oc.a = 0.0;
  oc.bootstrap = 50;
  oc.require_certificate = false;
  const auto r = one_point_harness(make_nonlinearity("constant", {{"c", 1.0}}), oc);
  REQUIRE(r.w2_diff.size() == 1);
  REQUIRE(r.w2_diff_se.size() == 1);
  CHECK(r.w2_diff[0] == doctest::Approx(r.rows[1].w2 - r.rows[0].w2));
  CHECK(r.w2_diff_se[0] > 0.0);
  CHECK(r.non_increasing_within_noise == (r.w2_diff[0] <= 3.0 * r.w2_diff_se[0]));
  const auto again = one_point_harness(make_nonlinearity("constant", {{"c", 1.0}}), oc);
  CHECK(again.w2_diff_se[0] == r.w2_diff_se[0]);
}
