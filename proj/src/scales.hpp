#pragma once

#include <array>

namespace decoupler::scales {

/// L(tau) = log(1 + tau), tau >= 0.
double log_scale(double tau);

/// L(tau) / L(1/rho).
double l_rho(double tau, double rho);

/// S_rho(tau) = log(tau/rho + 1) / log(1/rho + 1).
double s_rho(double tau, double rho);

/// T_rho(q) = rho [(1 + 1/rho)^q - 1], the inverse of s_rho.
double t_rho(double q, double rho);

/// gamma_rho = sqrt(4 pi / L(1/rho)).
double gamma_rho(double rho);

/// U_{T0,T1,rho}(t) = L(1/rho)^{-1} log((T1 - T0 + rho) / (T1 - t + rho)), t in [T0, T1].
double time_change_u(double t, double t0, double t1, double rho);

/// R_{T0,T1,rho}(q), the inverse of time_change_u on [0, S_rho(T1 - T0)].
double time_change_r(double q, double t0, double t1, double rho);

/// Two-dimensional heat kernel G_tau(x) = (2 pi tau)^{-1} exp(-|x|^2 / (2 tau)).
double heat_kernel(double tau, std::array<double, 2> x);

/// Fourier symbol of G_tau: exp(-tau |k|^2 / 2).
double heat_symbol(double tau, double k2);

/// kappa_{ell,rho} = L(1/rho)^{-1/(1 - 2/ell)}, ell > 2.
double kappa(double ell, double rho);

/// nu_rho = 2 L(L(1/rho)).
double nu(double rho);

}  // namespace decoupler::scales
