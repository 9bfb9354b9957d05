#pragma once

#include <functional>
#include <string>
#include <vector>

#include "decoupling_field.hpp"

namespace decoupler {

struct PdeConfig {
  double Q0 = 1.0;
  double b_min = -4.0;
  double b_max = 4.0;
  double h_b = 1.0 / 64.0;
  double q_out = 0.01;       ///< spacing of stored q slices
  double cfl = 0.4;          ///< dq <= cfl h^2 / max H
  double dq_floor = 1e-9;
  std::vector<double> kinks;  ///< declared non-smooth points, excluded from residual norms
  /// Edge closure: "quadratic" sets d_b^3 H = 0 (exact on the quadratic family),
  /// "linear" sets d_b^2 H = 0.
  std::string boundary = "quadratic";
};

/// Solution of d_q H = (1/2) H d_b^2 H, H(0, .) = sigma^2 on a uniform b grid, stored on
/// a uniform q grid of output slices (DecouplingField container, quantity "H").
struct HField {
  DecouplingField field;
  std::size_t steps = 0;
  double min_dq = 0.0;
  double max_dq = 0.0;
  std::size_t floor_events = 0;  ///< negative values clipped to zero
  double floor_max_sigma_sq = 0.0;  ///< max sigma^2 near clipped nodes
  std::vector<double> kinks;
};

/// Explicit Euler in q with centered second differences, adaptive CFL step,
/// positivity floor and the configured edge closure.
HField solve_h(const std::function<double(double)>& sigma_sq, const PdeConfig& cfg);

struct ResidualReport {
  double l1_linf = 0.0;     ///< int_0^Q sup_b |d_q H - H d_b^2 H / 2| dq over interior, kink-free nodes
  double max_abs = 0.0;
  double exclusion_radius = 0.0;
  std::size_t excluded_nodes = 0;
};

/// Independent residual: fourth-order q derivative on stored slices, centered
/// second difference in b.
ResidualReport residual_check(const HField& H);

struct CompareReport {
  double discrepancy = 0.0;  ///< sup |sqrt H - J| / <b> over probes
  double budget = 0.0;       ///< 3 (stderr + 1e-3)
  double worst_q = 0.0, worst_b = 0.0;
  std::size_t probes = 0;
};

/// Compares sqrt(H) with J on a probe set (defaults to a uniform 50-point set).
CompareReport compare_to_decoupling(const HField& H, const DecouplingField& J,
                                    std::vector<std::pair<double, double>> probes = {});

/// Builds an HField holding the given exact function (for residual certification).
HField hfield_from(const std::function<double(double, double)>& h, const PdeConfig& cfg);

/// Lipschitz-in-b estimate of sqrt(H) per stored slice.
std::vector<double> sqrt_h_lipschitz(const HField& H);

}  // namespace decoupler
