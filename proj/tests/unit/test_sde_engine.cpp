#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "errors.hpp"
#include "nonlinearity.hpp"
#include "rng.hpp"
#include "sde_engine.hpp"

using namespace decoupler;

namespace {

double mean_se(const std::vector<double>& x, double* se) {
  double m = 0.0, ss = 0.0;
  for (double v : x) m += v;
  m /= double(x.size());
  for (double v : x) ss += (v - m) * (v - m);
  *se = std::sqrt(ss / double(x.size() - 1) / double(x.size()));
  return m;
}

}  // namespace

TEST_CASE("solve_theta second moment in the linear case") {
  const double beta = 0.5;
  FunctionDiffusivity g(1, 1.0, [&](double p, const Vec& b) { return Mat::Constant(1, 1, beta * b(0) / std::sqrt(1.0 - beta * beta * p)); },
                        [&](double p, double b) { return beta * b / std::sqrt(1.0 - beta * beta * p); });
  ThetaConfig cfg;
  cfg.Q = 1.0;
  cfg.steps = 200;
  cfg.n_paths = 40000;
  cfg.seed = 3;
  const auto ens = solve_theta(g, Vec::Constant(1, 2.0), cfg);
  std::vector<double> sq(ens.n);
  for (std::size_t i = 0; i < ens.n; ++i) sq[i] = ens.endpoint(i) * ens.endpoint(i);
  double se;
  const double m = mean_se(sq, &se);
  CHECK(std::abs(m - 16.0 / 3.0) <= 3.0 * se);
}

TEST_CASE("solve_theta is reproducible and path-indexed") {
  ConstantDiffusivity g(Mat::Identity(1, 1));
  ThetaConfig cfg;
  cfg.n_paths = 100;
  cfg.seed = 8;
  const auto a = solve_theta(g, Vec::Zero(1), cfg);
  cfg.n_paths = 50;
  const auto b = solve_theta(g, Vec::Zero(1), cfg);
  for (std::size_t i = 0; i < 50; ++i) CHECK(a.endpoint(i) == b.endpoint(i));
}

TEST_CASE("fixed-point residual improves by about sqrt 2 per step halving") {
  const double beta = 0.5;
  FunctionDiffusivity g(1, 1.0, [&](double, const Vec& b) { return Mat::Constant(1, 1, beta * std::sqrt(1.0 + b(0) * b(0))); },
                        [&](double, double b) { return beta * std::sqrt(1.0 + b * b); });
  double r[2];
  for (int k = 0; k < 2; ++k) {
    ThetaConfig cfg;
    cfg.steps = 50 << k;
    cfg.n_paths = 4000;
    cfg.seed = 4;
    cfg.record_paths = true;
    const auto ens = solve_theta(g, Vec::Ones(1), cfg);
    r[k] = fixed_point_residual(g, ens, Vec::Ones(1));
  }
  CHECK(r[1] < r[0]);
  CHECK(r[0] / r[1] == doctest::Approx(std::sqrt(2.0)).epsilon(0.25));
}

TEST_CASE("fixed-point residual detects the wrong diffusivity") {
  ConstantDiffusivity g(Mat::Identity(1, 1)), g2(Mat::Constant(1, 1, 2.0));
  ThetaConfig cfg;
  cfg.steps = 100;
  cfg.n_paths = 4000;
  cfg.record_paths = true;
  const auto ens = solve_theta(g, Vec::Zero(1), cfg);
  // |int (2 - 1) dB|_{L2} = 1 at q = 1.
  CHECK(fixed_point_residual(g2, ens, Vec::Zero(1)) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(fixed_point_residual(g, ens, Vec::Zero(1)) < 1e-12);
}

TEST_CASE("tree correlation validation and closure") {
  TreeCorrelation p(3, 1.0);
  p.set(0, 1, 0.5);
  p.set(0, 2, 0.2);
  p.set(1, 2, 0.2);
  CHECK_NOTHROW(p.validate());
  p.set(1, 2, 0.1);
  CHECK_THROWS_AS(p.validate(), Error);
  double adj = 0.0;
  const auto c = ultrametric_closure(p, &adj);
  CHECK_NOTHROW(c.validate());
  CHECK(c(1, 2) == doctest::Approx(0.2));
  CHECK(adj == doctest::Approx(0.1));
}

TEST_CASE("tree Brownian covariances on the three-leaf example") {
  TreeCorrelation p(3, 1.0);
  p.set(0, 1, 0.5);
  p.set(0, 2, 0.2);
  p.set(1, 2, 0.2);
  const int reps = 6000;
  std::vector<double> x01(reps), x02(reps), x00(reps);
  for (int k = 0; k < reps; ++k) {
    const auto paths = tree_brownian(p, {0.0, 1.0}, 1, 5, std::uint32_t(k));
    const auto e = paths.node(1.0);
    x01[k] = paths.at(0, e) * paths.at(1, e);
    x02[k] = paths.at(0, e) * paths.at(2, e);
    x00[k] = paths.at(0, e) * paths.at(0, e);
  }
  double se1, se2, se0;
  const double m01 = mean_se(x01, &se1), m02 = mean_se(x02, &se2), m00 = mean_se(x00, &se0);
  CHECK(std::abs(m01 - 0.5) <= 3.0 * se1);
  CHECK(std::abs(m02 - 0.2) <= 3.0 * se2);
  CHECK(std::abs(m00 - 1.0) <= 3.0 * se0);
}

TEST_CASE("tree Brownian paths coincide before their split time") {
  TreeCorrelation p(2, 1.0);
  p.set(0, 1, 0.4);
  const auto paths = tree_brownian(p, {0.0, 0.2, 0.4, 0.7, 1.0}, 2, 1);
  const auto k = paths.node(0.4);
  CHECK(paths.at(0, k, 1) == paths.at(1, k, 1));
  CHECK(paths.at(0, paths.node(1.0)) != paths.at(1, paths.node(1.0)));
}

TEST_CASE("multipoint Psi with constant J has covariance equal to shared time") {
  TreeCorrelation p(2, 1.0);
  p.set(0, 1, 0.5);
  ConstantDiffusivity J(Mat::Identity(1, 1), 1.0);
  MultipointConfig cfg;
  cfg.n_samples = 20000;
  cfg.steps = 20;
  cfg.seed = 2;
  const auto s = solve_multipoint_psi(J, p, {Vec::Zero(1), Vec::Zero(1)}, {1.0, 1.0}, cfg);
  std::vector<double> prod(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) prod[i] = s[2 * i] * s[2 * i + 1];
  double se;
  const double m = mean_se(prod, &se);
  CHECK(std::abs(m - 0.5) <= 3.0 * se);
}

TEST_CASE("W2 between N(0,1) and N(1,1)") {
  Stream s(1, Domain::Test, 77);
  std::vector<double> a(100000), b(100000);
  s.fill_normal(a.data(), a.size());
  s.fill_normal(b.data(), b.size());
  for (double& x : b) x += 1.0;
  CHECK(wasserstein2(a, b, 1).value == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("W2 in two dimensions: assignment and shift") {
  Stream s(2, Domain::Test, 78);
  std::vector<double> a(512), b(512);
  s.fill_normal(a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + (i % 2 == 0 ? 3.0 : 4.0);
  const auto r = wasserstein2(a, b, 2);
  CHECK(r.method == "assignment");
  CHECK(r.value == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(wasserstein2(a, a, 2).value == doctest::Approx(0.0));
}

TEST_CASE("SDE1 round trip") {
  const std::vector<double> d{1.0, -2.5, 3.25, 4.0, 5.5, -6.0};
  const std::string path = (std::filesystem::temp_directory_path() / "sde1_roundtrip.bin").string();
  write_sde1(path, d, 2);
  int m = 0;
  CHECK(read_sde1(path, &m) == d);
  CHECK(m == 2);
  std::filesystem::remove(path);
}
