#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decoupling_field.hpp"
#include "nonlinearity.hpp"
#include "sde_engine.hpp"

namespace decoupler {

struct McConfig {
  int steps_per_unit = 200;  ///< Euler-Maruyama steps per unit of q
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  double tol = 2e-3;  ///< stopping tolerance on the X-norm change between iterates
  int max_iter = 40;
  int warmup_iters = 2;            ///< initial iterations run on a path subset
  std::size_t warmup_paths = 4000;
};

struct GridConfig {
  double Q0 = 1.0;
  double q_step = 0.1;
  double B = 8.0;
  double db = 0.5;
};

/// [E^ sigma^2(Theta^g_{a,Q}(Q))]^{1/2} with its Monte Carlo standard error.
struct QOperatorResult {
  Mat value;
  double stderr_ = 0.0;
};

QOperatorResult q_operator(const NonlinearitySpec& sigma, const Diffusivity& g, double Q, const Vec& a,
                           const ThetaConfig& mc);

struct PicardReport {
  std::vector<double> residuals;  ///< X-norm change per iteration
  std::vector<std::size_t> paths_used;
  int iterations = 0;
  bool converged = false;
  double max_stderr = 0.0;
  double worst_contraction = 0.0;  ///< max ratio of successive residuals after warm-up
};

/// Picard iteration J^{n+1}(Q, b) = Q_sigma[J^n](Q, b) on the grid, starting from
/// J^0(q, .) = sigma. All nodes and iterations share one set of Brownian increments.
DecouplingField picard_solve(const NonlinearitySpec& sigma, const GridConfig& grid, const McConfig& mc,
                             PicardReport* report = nullptr);

struct ExtendReport {
  double slice_lipschitz = 0.0;
  double allowed_step = 0.0;      ///< Lip(J(Q0, .))^{-2}
  double certified_horizon = 0.0;  ///< Q0 + Lip(J(Q0, .))^{-2}
  PicardReport picard;
};

/// Continues J past its horizon by solving with sigma <- J(Q0, .) for delta_q and
/// concatenating. delta_q must be a multiple of the field's q step.
DecouplingField extend(const DecouplingField& J, double delta_q, const McConfig& mc, ExtendReport* report = nullptr);

/// J_{zeta sigma}(q, b) = zeta J_sigma(zeta^2 q, b).
DecouplingField rescale(const DecouplingField& J, double zeta);

struct ZeroSetReport {
  std::vector<double> zeros;           ///< b nodes with sigma(b) <= tol
  std::vector<double> lost_zeros;      ///< zeros of sigma where some J(q, b) > tol_propagated
  std::vector<double> spurious_zeros;  ///< nonzeros of sigma where some J(q, b) <= tol
  double max_on_zero_set = 0.0;
  bool ok = true;
};

ZeroSetReport zero_set_check(const DecouplingField& J, const NonlinearitySpec& sigma, double tol = 1e-12,
                             double tol_propagated = 1e-8);

struct HypothesisReport {
  std::string interval_class;  ///< "empty", "bounded", "half-line" or "real-line"
  double lower = 0.0, upper = 0.0;
  double beta = 0.0;
  double K = 0.0;
  double gamma = 0.0;
  double linear_k = 0.0;  ///< lower constant k of a k d <= sigma <= beta d sandwich (half-line)
  bool certificate = false;
  double certified_horizon = 0.0;
  std::string note;
};

/// Sandwich-bound checker for positive-set classes: bounded interval, half-line or R.
HypothesisReport hypothesis_check(const NonlinearitySpec& sigma, const std::vector<double>& probe_grid);

struct CauchyReport {
  double ks = 0.0;
  double r = 0.0;
  double implied_r = 0.0;  ///< log(1/(1 - beta^2)), the r reached by Gamma_{a,1}(1)
  std::size_t n = 0;
  int steps = 0;
};

/// Simulates dX = (alpha^2 + X^2)^{1/2} dB from X(0) = a to time r and returns the
/// Kolmogorov-Smirnov distance to the Cauchy(alpha) law.
CauchyReport cauchy_limit_ks(double alpha, double beta, double r, double a, std::size_t n, int steps,
                             std::uint64_t seed);

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace decoupler
