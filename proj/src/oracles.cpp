#include "oracles.hpp"

#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace decoupler {

namespace {

double sp(const OracleSpec& s, const std::string& key, double fallback) {
  auto it = s.scalars.find(key);
  return it == s.scalars.end() ? fallback : it->second;
}

void reject_q(const OracleSpec& s, double q) {
  if (q < 0.0) fail(ErrorKind::InvalidArgument, "oracle_J: negative q");
  if (q >= s.blowup()) {
    std::ostringstream os;
    os << "oracle_J(" << s.family << "): q = " << q << " at or beyond blow-up " << s.blowup();
    fail(ErrorKind::Horizon, os.str());
  }
}

}  // namespace

int OracleSpec::dim() const { return family == "affine_quadratic" ? int(g0.rows()) : 1; }

double OracleSpec::blowup() const {
  const double inf = std::numeric_limits<double>::infinity();
  if (family == "linear" || family == "add_mult" || family == "positive_part") {
    const double beta = std::abs(sp(*this, "beta", 0.0));
    return beta == 0.0 ? inf : 1.0 / (beta * beta);
  }
  if (family == "affine_quadratic") {
    const double n = g2.size() ? Eigen::JacobiSVD<Mat>(g2).singularValues().maxCoeff() : 0.0;
    return n == 0.0 ? inf : 1.0 / n;
  }
  return inf;
}

double oracle_H(const OracleSpec& s, double q, double b) {
  reject_q(s, q);
  const std::string& f = s.family;
  if (f == "constant") {
    const double c = sp(s, "c", 1.0);
    return c * c;
  }
  if (f == "linear") {
    const double beta = sp(s, "beta", 0.0);
    return beta * beta * b * b / (1.0 - beta * beta * q);
  }
  if (f == "add_mult") {
    const double a = sp(s, "alpha", 1.0), beta = sp(s, "beta", 0.0);
    return (a * a + b * b) / (1.0 / (beta * beta) - q);
  }
  if (f == "positive_part") {
    const double beta = sp(s, "beta", 0.0), bp = std::max(b, 0.0);
    return beta * beta * bp * bp / (1.0 - beta * beta * q);
  }
  if (f == "fisher_wright" || f == "fisher_wright_clipped") {
    const double a2 = std::pow(sp(s, "alpha", 1.0), -2.0);
    const double w = b * (1.0 - b);
    if (w >= 0.0) return w / (a2 + q);
    if (f == "fisher_wright_clipped") return 0.0;
    // Outside [0, 1] sigma^2 = alpha^2 (b^2 - b) is again quadratic, now with g2 = +alpha^2.
    if (q >= a2) {
      std::ostringstream os;
      os << "oracle_J(fisher_wright): q = " << q << " at or beyond blow-up " << a2 << " for b outside [0, 1]";
      fail(ErrorKind::Horizon, os.str());
    }
    return -w / (a2 - q);
  }
  if (f == "feller") return std::abs(b);
  if (f == "affine_quadratic") {
    require(s.dim() == 1, "oracle_H: scalar evaluation needs m = 1");
    Vec v(1);
    v(0) = b;
    const double j = oracle_J(s, q, v)(0, 0);
    return j * j;
  }
  fail(ErrorKind::Config, "oracle_J: unknown family '" + f + "'");
}

double oracle_J(const OracleSpec& s, double q, double b) {
  if (s.family == "affine_quadratic") {
    Vec v(1);
    v(0) = b;
    return oracle_J(s, q, v)(0, 0);
  }
  return psd_sqrt(oracle_H(s, q, b));
}

Mat oracle_J(const OracleSpec& s, double q, const Vec& b) {
  if (s.family != "affine_quadratic") {
    require(b.size() == 1, "oracle_J: scalar family needs m = 1");
    return Mat::Constant(1, 1, oracle_J(s, q, b(0)));
  }
  reject_q(s, q);
  const int m = s.dim();
  const int m2 = m * m;
  require(b.size() == m, "oracle_J: b has wrong dimension");
  require(s.g2.rows() == m2 && s.g2.cols() == m2, "oracle_J: g2 must be m^2 x m^2");
  require(s.g1.size() == 0 || (s.g1.rows() == m2 && s.g1.cols() == m), "oracle_J: g1 must be m^2 x m");
  const Mat bb = b * b.transpose();
  Vec rhs = s.g2 * Eigen::Map<const Vec>(bb.data(), m2);
  if (s.g1.size()) rhs += s.g1 * b;
  rhs += Eigen::Map<const Vec>(s.g0.data(), m2);
  const Mat a = Mat::Identity(m2, m2) - q * s.g2;
  Vec h = a.partialPivLu().solve(rhs);
  Mat H = Eigen::Map<Mat>(h.data(), m, m);
  H = 0.5 * (H + H.transpose());
  return psd_sqrt(H);
}

OracleSpec oracle_for(const NonlinearitySpec& n) {
  if (n.family.empty() || n.family == "tabulated")
    fail(ErrorKind::Config, "no closed-form oracle for this nonlinearity");
  OracleSpec s;
  s.family = n.family;
  s.scalars = n.params;
  return s;
}

OracleSpec affine_quadratic_scalar(double g2, double g1, double g0) {
  OracleSpec s;
  s.family = "affine_quadratic";
  s.g2 = Mat::Constant(1, 1, g2);
  s.g1 = Mat::Constant(1, 1, g1);
  s.g0 = Mat::Constant(1, 1, g0);
  return s;
}

std::shared_ptr<Diffusivity> oracle_diffusivity(const OracleSpec& spec, double horizon) {
  require(horizon < spec.blowup(), "oracle_diffusivity: horizon at or beyond blow-up");
  const int m = spec.dim();
  std::function<double(double, double)> scalar;
  if (m == 1) scalar = [spec](double q, double b) { return oracle_J(spec, q, b); };
  double lip = std::numeric_limits<double>::infinity();
  if (spec.family == "linear" || spec.family == "add_mult" || spec.family == "positive_part") {
    const double beta = std::abs(spec.scalars.count("beta") ? spec.scalars.at("beta") : 0.0);
    lip = beta / std::sqrt(1.0 - beta * beta * horizon);
  } else if (spec.family == "constant") {
    lip = 0.0;
  }
  return std::make_shared<FunctionDiffusivity>(
      m, horizon, [spec](double q, const Vec& b) { return oracle_J(spec, q, b); }, scalar, lip);
}

DecouplingField oracle_field(const OracleSpec& spec, double Q0, double dq, double B, double db) {
  require(spec.dim() == 1, "oracle_field: grid mode needs m = 1");
  const int nq = int(std::llround(Q0 / dq)) + 1;
  const int nb = int(std::llround(2.0 * B / db)) + 1;
  DecouplingField f(nq, dq, nb, -B, db);
  f.provenance = "oracle";
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nb; ++j) f.at(i, j) = oracle_J(spec, f.q(i), f.b(j));
  f.compute_lipschitz();
  f.qbar_lower = spec.blowup();
  return f;
}

}  // namespace decoupler
