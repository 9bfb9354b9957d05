#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "errors.hpp"
#include "nonlinearity.hpp"
#include "rng.hpp"
#include "scales.hpp"
#include "spde_harness.hpp"
#include "spde_sim.hpp"

using namespace decoupler;

namespace {

double field_mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / double(v.size());
}

}  // namespace

TEST_CASE("grid and time step constraints") {
  const double rho = 1e-2;
  SpectralGrid ok(32, 32 * max_spacing(rho)), coarse(32, 32 * 2.0 * max_spacing(rho));
  CHECK_NOTHROW(SpdeState::constant(ok, rho, max_dt(rho), Vec::Ones(1)));
  CHECK_THROWS_AS(SpdeState::constant(ok, rho, 2.0 * max_dt(rho), Vec::Ones(1)), Error);
  CHECK_THROWS_AS(SpdeState::constant(coarse, rho, max_dt(rho), Vec::Ones(1)), Error);
}

TEST_CASE("zero sigma is pure heat flow") {
  const double rho = 1e-2;
  SpectralGrid g(32, 32 * max_spacing(rho));
  std::vector<double> v0(g.real_size());
  for (std::size_t t = 0; t < v0.size(); ++t) v0[t] = std::sin(0.1 * double(t)) + 2.0;
  SpdeState s(g, rho, max_dt(rho), 1, v0);
  const auto zero = make_nonlinearity("constant", {{"c", 0.0}});
  Stream rng(1, Domain::Test, 0);
  for (int k = 0; k < 5; ++k) spde_step(s, zero, rng);
  const auto expect = heat_apply(g, v0, 5.0 * max_dt(rho));
  const auto got = s.field();
  for (std::size_t t = 0; t < got.size(); ++t) CHECK(got[t] == doctest::Approx(expect[t]).epsilon(1e-12));
  CHECK(s.t() == doctest::Approx(5.0 * max_dt(rho)));
  CHECK(s.steps() == 5);
}

TEST_CASE("non-finite field aborts with the step index") {
  const double rho = 1e-2;
  SpectralGrid g(16, 16 * max_spacing(rho));
  auto s = SpdeState::constant(g, rho, max_dt(rho), Vec::Ones(1));
  NonlinearitySpec bad;
  bad.eval = [](const Vec&) { return Mat::Constant(1, 1, INFINITY); };
  bad.eval_scalar = [](double) { return INFINITY; };
  Stream rng(1, Domain::Test, 1);
  spde_step(s, bad, rng);
  try {
    spde_step(s, bad, rng);
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("scheme variance mode sum approaches S_rho") {
  const double rho = 1e-2;
  SpectralGrid g(128, 128 * max_spacing(rho));
  const long K = min_steps(rho, 1.0);
  CHECK(scheme_constant_variance(g, rho, 1.0 / K, K, 1.0) == doctest::Approx(0.999445).epsilon(1e-5));
  CHECK(scheme_constant_variance(g, rho, 1.0 / K, K, 2.0) == doctest::Approx(4.0 * 0.999445).epsilon(1e-5));
}

TEST_CASE("constant sigma: variance and mean over replicas") {
  const double rho = 1e-2, t = 0.5;
  SpectralGrid g(64, 64 * max_spacing(rho));
  const long K = min_steps(rho, t);
  const auto c = make_nonlinearity("constant", {{"c", 1.5}});
  const int reps = 200;
  std::vector<double> x(reps), m(reps);
  for (int r = 0; r < reps; ++r) {
    auto s = SpdeState::constant(g, rho, t / K, Vec::Constant(1, 0.3));
    for (long k = 0; k < K; ++k) {
      Stream rng(21, Domain::Test, std::uint32_t(r), std::uint32_t(k));
      spde_step(s, c, rng);
    }
    const auto v = s.field();
    x[r] = v[0] - 0.3;
    m[r] = field_mean(v) - 0.3;
  }
  double mean = 0.0, var = 0.0, mm = 0.0;
  for (int r = 0; r < reps; ++r) {
    mean += x[r];
    var += x[r] * x[r];
    mm += m[r];
  }
  mean /= reps;
  var /= reps;
  mm /= reps;
  const double target = 2.25 * scales::s_rho(t, rho);
  // Var of a sample second moment of a Gaussian is 2 sigma^4.
  CHECK(std::abs(var - target) <= 3.0 * target * std::sqrt(2.0 / reps));
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(target / reps));
  double sm = 0.0;
  for (double v : m) sm += (v - mm) * (v - mm);
  CHECK(std::abs(mm) <= 3.0 * std::sqrt(sm / (reps - 1) / reps));
}

TEST_CASE("aggregated constant advance has the stepped law") {
  const double rho = 1e-2;
  SpectralGrid g(64, 64 * max_spacing(rho));
  const long K = 37;
  const double dt = max_dt(rho);
  const int reps = 300;
  double a = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto s = SpdeState::constant(g, rho, dt, Vec::Zero(1));
    Stream rng(3, Domain::Test, std::uint32_t(r), 9);
    spde_advance_constant(s, Mat::Identity(1, 1), int(K), rng);
    CHECK(s.steps() == K);
    const auto v = s.field();
    for (double x : v) a += x * x;
  }
  a /= double(reps) * double(g.real_size());
  CHECK(a == doctest::Approx(scheme_constant_variance(g, rho, dt, K, 1.0)).epsilon(0.03));
}

TEST_CASE("box averages") {
  SpectralGrid g(64, 6.4);
  std::vector<double> c(g.real_size(), 2.5), f(g.real_size());
  for (std::size_t t = 0; t < f.size(); ++t) f[t] = std::cos(0.7 * double(t));
  for (double x : box_average(g, c, 0.8, 0.3, 0.1).field) CHECK(x == doctest::Approx(2.5));
  CHECK(box_average(g, f, g.h()).field == f);
  CHECK_THROWS_AS(box_average(g, f, 0.5 * g.h()), Error);
  const auto b = box_average(g, f, 0.75);
  CHECK(b.cells == 8);
  CHECK(field_mean(b.field) == doctest::Approx(field_mean(f)).epsilon(1e-12));
}

TEST_CASE("box average composition bound") {
  // Smooth unit-variance field; zeta1 = 32 h, zeta2 = 2 h, zeta3 snapped from sqrt(zeta1^2 + zeta2^2).
  const int n = 256;
  SpectralGrid g(n, double(n));
  Stream rng(4, Domain::Test, 5);
  std::vector<double> w(g.real_size());
  rng.fill_normal(w.data(), w.size());
  w = heat_apply(g, w, 64.0);
  double var = 0.0;
  for (double x : w) var += x * x;
  var /= double(w.size());
  for (double& x : w) x /= std::sqrt(var);

  const double z1 = 32.0, z2 = 2.0, z3 = std::hypot(z1, z2);
  const auto inner = box_average(g, w, z2).field;
  const auto direct = box_average(g, w, z3).field;
  double best = INFINITY;
  for (int off = 0; off < 32; off += 2) {
    const auto outer = box_average(g, inner, z1, off, off).field;
    double e = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) e += (outer[t] - direct[t]) * (outer[t] - direct[t]);
    best = std::min(best, e / double(w.size()));
  }
  CHECK(best <= 64.0 * (z2 / z1) * (z2 / z1));
}

TEST_CASE("martingale V: quadratic variation for constant sigma") {
  const double rho = 1e-2, T = 0.25;
  SpectralGrid g(32, 32 * max_spacing(rho));
  const long K = min_steps(rho, T);
  const auto c = make_nonlinearity("constant", {{"c", 1.0}});
  const int reps = 150;
  std::vector<double> qv(reps), lag(reps);
  double expected = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto s = SpdeState::constant(g, rho, T / K, Vec::Constant(1, 1.0));
    SpdeHistory h;
    h.record(s);
    for (long k = 0; k < K; ++k) {
      Stream rng(5, Domain::Test, std::uint32_t(r), std::uint32_t(k));
      spde_step(s, c, rng);
      h.record(s);
    }
    const auto mp = martingale_v(h, c, rho, T, 3, 7);
    double acc = 0.0, ex = 0.0;
    for (double d : mp.qv_increments) acc += d;
    for (double d : mp.qv_expected) ex += d;
    qv[r] = acc;
    expected = ex;
    const std::size_t half = mp.values.size() / 2;
    lag[r] = (mp.values[half] - mp.values[0]) * (mp.values.back() - mp.values[half]);
    CHECK(mp.values.front() == doctest::Approx(1.0));
  }
  CHECK(expected == doctest::Approx(scales::s_rho(T, rho)).epsilon(1e-10));
  auto stats = [](const std::vector<double>& x, double* se) {
    double m = 0.0, ss = 0.0;
    for (double v : x) m += v;
    m /= double(x.size());
    for (double v : x) ss += (v - m) * (v - m);
    *se = std::sqrt(ss / double(x.size() - 1) / double(x.size()));
    return m;
  };
  double se_qv, se_lag;
  const double m_qv = stats(qv, &se_qv), m_lag = stats(lag, &se_lag);
  CHECK(std::abs(m_qv - expected) <= 3.0 * se_qv);
  CHECK(std::abs(m_lag) <= 3.0 * se_lag);
}

TEST_CASE("SPD1 round trip") {
  const double rho = 1e-2;
  SpectralGrid g(16, 16 * max_spacing(rho));
  auto s = SpdeState::constant(g, rho, max_dt(rho), Vec::Constant(1, 0.5));
  Stream rng(1, Domain::Test, 3);
  spde_step(s, make_nonlinearity("constant", {{"c", 1.0}}), rng);
  const std::string path = (std::filesystem::temp_directory_path() / "roundtrip.spd1").string();
  write_spd1(path, s);
  const auto r = read_spd1(path);
  CHECK(r.n == 16);
  CHECK(r.m == 1);
  CHECK(r.rho == rho);
  CHECK(r.t == s.t());
  CHECK(r.values == s.field());
  std::remove(path.c_str());
}
