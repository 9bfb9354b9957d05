#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "decoupling.hpp"
#include "decoupling_field.hpp"
#include "errors.hpp"
#include "oracles.hpp"

using namespace decoupler;

namespace {

McConfig small_mc(std::uint64_t seed) {
  McConfig mc;
  mc.n_paths = 4000;
  mc.steps_per_unit = 50;
  mc.seed = seed;
  mc.tol = 5e-3;
  mc.warmup_iters = 0;
  return mc;
}

GridConfig small_grid(double Q0) {
  GridConfig g;
  g.Q0 = Q0;
  g.q_step = 0.1;
  g.B = 4.0;
  g.db = 0.5;
  return g;
}

}  // namespace

TEST_CASE("Q operator on the linear closed form") {
  const auto sigma = make_nonlinearity("linear", {{"beta", 0.5}});
  const auto J = oracle_diffusivity(oracle_for(sigma), 1.0);
  ThetaConfig mc;
  mc.Q = 1.0;
  mc.steps = 200;
  mc.n_paths = 40000;
  mc.seed = 6;
  const auto r = q_operator(sigma, *J, 1.0, Vec::Constant(1, 2.0), mc);
  CHECK(std::abs(r.value(0, 0) - 1.1547005383792515) <= 3.0 * r.stderr_);
}

TEST_CASE("constant sigma converges in one iteration") {
  const auto sigma = make_nonlinearity("constant", {{"c", 1.0}});
  PicardReport rep;
  const auto J = picard_solve(sigma, small_grid(1.0), small_mc(1), &rep);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(rep.residuals.back() < 1e-12);
  CHECK(J.eval(0.7, 1.3) == doctest::Approx(1.0));
}

TEST_CASE("Picard on add_mult matches the closed form") {
  const auto sigma = make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.5}});
  PicardReport rep;
  const auto J = picard_solve(sigma, small_grid(1.0), small_mc(2), &rep);
  CHECK(rep.converged);
  const auto o = oracle_for(sigma);
  const double err = x_norm_error(J, [&](double q, double b) { return oracle_J(o, q, b); });
  CHECK(err <= std::max(2e-2, 3.0 * x_norm_stderr(J)));
  // (1 + 1)/(4 - 0.5) at q = 0.5, b = 1
  CHECK(oracle_J(o, 0.5, 1.0) == doctest::Approx(0.7559289460184544).epsilon(1e-14));
}

TEST_CASE("rescale is exact on oracle fields") {
  const auto o4 = oracle_for(make_nonlinearity("linear", {{"beta", 0.4}}));
  const auto o8 = oracle_for(make_nonlinearity("linear", {{"beta", 0.8}}));
  const auto F = oracle_field(o4, 1.2, 0.01, 4.0, 0.25);
  const auto G = rescale(F, 2.0);
  CHECK(G.horizon() == doctest::Approx(0.3));
  double worst = 0.0;
  for (int i = 0; i < G.nq; ++i)
    for (int j = 0; j < G.nb; ++j) worst = std::max(worst, std::abs(G.at(i, j) - oracle_J(o8, G.q(i), G.b(j))));
  CHECK(worst <= 1e-10);
  CHECK_THROWS_AS(rescale(F, 0.0), Error);
}

TEST_CASE("positive part keeps its zero set") {
  const auto sigma = make_nonlinearity("positive_part", {{"beta", 0.5}});
  const auto J = picard_solve(sigma, small_grid(1.0), small_mc(3));
  for (int i = 0; i < J.nq; ++i)
    for (int j = 0; j < J.nb; ++j)
      if (J.b(j) <= 0.0) CHECK(J.at(i, j) <= 1e-8);
  CHECK(zero_set_check(J, sigma).ok);
}

TEST_CASE("extension semigroup on add_mult") {
  const auto sigma = make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.6}});
  const auto direct = picard_solve(sigma, small_grid(1.2), small_mc(4));
  ExtendReport er;
  const auto ext = extend(picard_solve(sigma, small_grid(0.7), small_mc(5)), 0.5, small_mc(6), &er);
  CHECK(ext.horizon() == doctest::Approx(1.2));
  CHECK(er.certified_horizon >= 1.2);
  const double err = x_norm_error(ext, [&](double q, double b) { return direct.eval(q, b); });
  CHECK(err <= std::max(3e-2, 3.0 * std::hypot(x_norm_stderr(ext), x_norm_stderr(direct))));
}

TEST_CASE("field container round trip") {
  const auto F = oracle_field(oracle_for(make_nonlinearity("linear", {{"beta", 0.5}})), 1.0, 0.1, 2.0, 0.5);
  const std::string path = (std::filesystem::temp_directory_path() / "field_roundtrip.dcf").string();
  save_field(path, F);
  const auto G = load_field(path);
  CHECK(G.values == F.values);
  CHECK(G.nq == F.nq);
  CHECK(G.quantity == F.quantity);
  CHECK_THROWS_AS(load_field("does_not_exist.dcf"), Error);
  std::remove(path.c_str());
}

TEST_CASE("hypothesis classes") {
  std::vector<double> probe;
  for (int k = -400; k <= 400; ++k) probe.push_back(k * 0.05);
  CHECK(hypothesis_check(make_nonlinearity("add_mult", {{"alpha", 1.0}, {"beta", 0.5}}), probe).interval_class ==
        "real-line");
  CHECK(hypothesis_check(make_nonlinearity("positive_part", {{"beta", 0.5}}), probe).interval_class == "half-line");
  CHECK(hypothesis_check(make_nonlinearity("fisher_wright_clipped", {{"alpha", 1.0}}), probe).interval_class == "bounded");
}

TEST_CASE("Cauchy limit") {
  const auto r = cauchy_limit_ks(1.0, 0.95, 6.0, 0.0, 20000, 600, 9);
  CHECK(r.ks <= 0.03);
}
