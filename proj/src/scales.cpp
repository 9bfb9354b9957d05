#include "scales.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace decoupler::scales {

namespace {

// log(1 + tau/rho) without overflow when tau/rho is huge.
double log1p_ratio(double tau, double rho) {
  const double r = tau / rho;
  if (std::isfinite(r) && r < 1e300) return std::log1p(r);
  return std::log(tau) - std::log(rho);
}

void require_rho(double rho) { require(rho > 0.0 && std::isfinite(rho), "rho must be positive"); }

}  // namespace

double log_scale(double tau) {
  require(tau >= 0.0, "log_scale: negative argument");
  return std::log1p(tau);
}

double l_rho(double tau, double rho) {
  require_rho(rho);
  return log_scale(tau) / log1p_ratio(1.0, rho);
}

double s_rho(double tau, double rho) {
  require_rho(rho);
  require(tau >= 0.0, "s_rho: negative tau");
  return log1p_ratio(tau, rho) / log1p_ratio(1.0, rho);
}

double t_rho(double q, double rho) {
  require_rho(rho);
  require(q >= 0.0, "t_rho: negative q");
  return rho * std::expm1(q * log1p_ratio(1.0, rho));
}

double gamma_rho(double rho) {
  require_rho(rho);
  return std::sqrt(4.0 * std::numbers::pi / log1p_ratio(1.0, rho));
}

double time_change_u(double t, double t0, double t1, double rho) {
  require_rho(rho);
  require(t0 < t1, "time_change_u: need T0 < T1");
  require(t >= t0 && t <= t1, "time_change_u: t outside [T0, T1]");
  // log((T1 - T0 + rho)/(T1 - t + rho)) = log1p((t - T0)/(T1 - t + rho))
  return std::log1p((t - t0) / (t1 - t + rho)) / log1p_ratio(1.0, rho);
}

double time_change_r(double q, double t0, double t1, double rho) {
  require_rho(rho);
  require(t0 < t1, "time_change_r: need T0 < T1");
  const double qmax = s_rho(t1 - t0, rho);
  require(q >= 0.0 && q <= qmax * (1.0 + 1e-14), "time_change_r: q outside [0, S_rho(T1 - T0)]");
  return t0 - std::expm1(-q * log1p_ratio(1.0, rho)) * (t1 - t0 + rho);
}

double heat_kernel(double tau, std::array<double, 2> x) {
  require(tau > 0.0, "heat_kernel: tau must be positive");
  const double r2 = x[0] * x[0] + x[1] * x[1];
  return std::exp(-r2 / (2.0 * tau)) / (2.0 * std::numbers::pi * tau);
}

double heat_symbol(double tau, double k2) { return std::exp(-0.5 * tau * k2); }

double kappa(double ell, double rho) {
  require(ell > 2.0, "kappa: ell must exceed 2");
  require_rho(rho);
  return std::pow(log1p_ratio(1.0, rho), -1.0 / (1.0 - 2.0 / ell));
}

double nu(double rho) {
  require_rho(rho);
  return 2.0 * std::log1p(log1p_ratio(1.0, rho));
}

}  // namespace decoupler::scales
