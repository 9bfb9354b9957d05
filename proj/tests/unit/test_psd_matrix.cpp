#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "psd_matrix.hpp"
#include "rng.hpp"

using namespace decoupler;

namespace {

Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("psd_sqrt of [[2,1],[1,2]]") {
  const Mat S = psd_sqrt(m2(2, 1, 1, 2));
  // Eigenvalues 1 and 3 on (1,-1)/sqrt2 and (1,1)/sqrt2.
  const double a = (1.0 + std::sqrt(3.0)) / 2.0, b = (std::sqrt(3.0) - 1.0) / 2.0;
  CHECK(S(0, 0) == doctest::Approx(a).epsilon(1e-14));
  CHECK(S(0, 1) == doctest::Approx(b).epsilon(1e-14));
  CHECK(S(1, 0) == doctest::Approx(b).epsilon(1e-14));
  CHECK((S * S - m2(2, 1, 1, 2)).norm() < 1e-14);
}

TEST_CASE("psd_sqrt clamps round-off and rejects indefinite input") {
  CHECK(psd_sqrt(m2(1, 0, 0, -1e-14))(1, 1) == 0.0);
  CHECK_THROWS_AS(psd_sqrt(m2(1, 0, 0, -0.5)), Error);
  CHECK_THROWS_AS(psd_sqrt(m2(1, 2, 0, 1)), Error);
  CHECK(psd_sqrt(4.0) == 2.0);
  CHECK_THROWS_AS(psd_sqrt(-1.0), Error);
}

TEST_CASE("matrix norms of diag(3, 4)") {
  const auto n = matrix_norms(m2(3, 0, 0, 4));
  CHECK(n.frobenius == doctest::Approx(5.0));
  CHECK(n.op == doctest::Approx(4.0));
  CHECK(n.nuclear == doctest::Approx(7.0));
}

TEST_CASE("reverse triangle is an equality for commuting constant pairs") {
  const auto r = check_reverse_triangle({{m2(2, 0, 0, 1), m2(1, 0, 0, 2), 1.0}});
  CHECK(r.lhs == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(r.rhs == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(r.violation < 1e-14);
}

TEST_CASE("reverse triangle stays exact on rank-deficient single atoms") {
  Stream s(11, Domain::Psd, 0);
  for (int k = 0; k < 200; ++k) {
    Mat a = Mat::Zero(4, 4), b = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) {
        a(i, j) = s.normal();
        b(i, j) = s.normal();
      }
    a = a * a.transpose();
    b = b * b.transpose();
    const auto r = check_reverse_triangle({{a, b, 1.0}});
    CHECK(r.violation <= 1e-10);
  }
}

TEST_CASE("Powers-Stormer on diag(1,0) vs diag(0,1)") {
  const auto r = check_powers_stormer({{m2(1, 0, 0, 0), m2(0, 0, 0, 1), 1.0}});
  CHECK(r.violations == 0);
  CHECK(r.worst_slack == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("random psd pairs satisfy all three inequalities") {
  Stream s(5, Domain::Psd, 1);
  std::vector<WeightedPair> pairs;
  for (int k = 0; k < 2000; ++k) {
    const int m = 1 + int(s.next_u32() % 4);
    Mat a(m, m), b(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        a(i, j) = s.normal();
        b(i, j) = s.normal();
      }
    pairs.push_back({a * a.transpose(), b * b.transpose(), 1.0});
    const auto rt = check_reverse_triangle({pairs.back(), {b * b.transpose(), a * a.transpose(), s.uniform()}});
    CHECK(rt.violation <= 1e-10);
  }
  CHECK(check_powers_stormer(pairs).violations == 0);
  CHECK(check_holder_schatten(pairs).violations == 0);
}

TEST_CASE("check_psd") {
  CHECK_NOTHROW(check_psd(m2(1, 0.5, 0.5, 1)));
  CHECK_THROWS_AS(check_psd(m2(1, 2, 2, 1)), Error);
}
