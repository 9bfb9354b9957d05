#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "nonlinearity.hpp"
#include "sde_engine.hpp"
#include "spde_sim.hpp"

namespace decoupler {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One run of a lockstep group: smoothing parameter, end time and step count.
struct LockstepRun {
  double rho = 1e-2;
  double T = 1.0;
  long steps = 0;
};

/// Advances every run from v0 = a on one lattice with common noise: the union of
/// all step grids is sampled once per replica and each run integrates the sums of
/// the union increments inside its own steps. `on_finish` fires when a run reaches T.
void run_lockstep(const SpectralGrid& grid, const NonlinearitySpec& sigma, const Vec& a,
                  const std::vector<LockstepRun>& runs, std::uint64_t seed, std::uint32_t replica,
                  const std::function<void(std::size_t, const SpdeState&)>& on_finish);

/// Smallest step count with dt <= rho/4.
long min_steps(double rho, double T);

/// Step counts for runs sharing the end time T, nested so the coarser grids are
/// sub-grids of the finer ones, minimizing the total number of steps. Input order
/// is preserved.
std::vector<long> nested_steps(const std::vector<double>& rhos, double T);

/// Probe positions on the torus of side L with pairwise distance >= spacing: the
/// denser of a square lattice and a lattice with alternately shifted rows.
std::vector<std::array<double, 2>> probe_layout(double L, double spacing, double h = 0.0);

/// Per-node variance recursion of the scheme for quadratic sigma^2 = g2 b^2 + g1 b + g0
/// from v0 = a; returns E sigma^2(v) after `steps` steps.
double scheme_quadratic_moment(const SpectralGrid& g, double rho, double dt, long steps, double a, double g2,
                               double g1, double g0);

/// Coefficients (g2, g1, g0) of sigma^2 when it is a quadratic polynomial on R.
bool quadratic_coefficients(const NonlinearitySpec& sigma, double* g2, double* g1, double* g0);

struct JRhoConfig {
  std::vector<double> rhos{1e-2, 3e-3, 1e-3};
  double q = 0.5;
  Vec a = Vec::Ones(1);
  int n = 256;
  double h = 0.0;  ///< 0 selects sqrt(min rho / 4)
  int replicas = 64;
  std::uint64_t seed = 1;
};

struct JRhoRow {
  double rho = 0.0, T = 0.0, dt = 0.0;
  long steps = 0;
  Mat J;                       ///< [E sigma^2(v_T)]^{1/2}
  double J_scalar = kNaN;      ///< J(0, 0)
  double stderr_ = kNaN;       ///< for J_scalar
  double mean_sigma_sq = kNaN;
  double se_sigma_sq = kNaN;
  double scheme_reference = kNaN;  ///< deterministic value of the same scheme, quadratic sigma^2 only
  double oracle_gap = kNaN;
};

struct JRhoReport {
  std::vector<JRhoRow> rows;
  std::vector<double> diff, diff_se;  ///< J_{i+1} - J_i with common noise, paired standard error
  double oracle = kNaN;
  bool monotone_toward_oracle = false;
  int n = 0;
  double L = 0.0, h = 0.0;
  int replicas = 0;
};

/// J_{sigma,rho}(q, a) = [E sigma^2(v_{T_rho(q)}(x))]^{1/2}. Every lattice node is a
/// sample of the same law, so each replica contributes its lattice average and the
/// standard error comes from the spread of replica averages.
JRhoReport estimate_j_sigma_rho(const NonlinearitySpec& sigma, const JRhoConfig& cfg);

struct OnePointConfig {
  std::vector<double> rhos{1e-2, 3e-3, 1e-3};
  double t = 1.0;
  double a = 1.0;
  int n = 512;
  double h = 0.0;
  int replicas = 84;
  std::vector<long> steps;  ///< empty selects nested_steps
  std::uint64_t seed = 1;
  std::size_t ref_paths = 100000;
  int ref_steps = 400;
  int bootstrap = 200;
  /// Decoupling function used for the reference law; null selects the closed form.
  std::shared_ptr<const Diffusivity> J;
  bool require_certificate = true;
  /// Called after each replica with its index; for progress output.
  std::function<void(int)> progress;
};

struct OnePointRow {
  double rho = 0.0, dt = 0.0;
  long steps = 0;
  std::size_t samples = 0;
  double w2 = kNaN;
  double mean = kNaN, var = kNaN;
  double gaussian_w2 = kNaN;  ///< c |sqrt(S_rho(t)) - 1| when sigma is constant
};

struct OnePointReport {
  std::vector<OnePointRow> rows;
  double ref_mean = kNaN, ref_var = kNaN;
  std::size_t ref_samples = 0;
  std::vector<std::array<double, 2>> probes;
  double spacing = 0.0;
  bool non_increasing = false;
  /// W2 steps between consecutive rhos with their paired replica-bootstrap stderr.
  std::vector<double> w2_diff, w2_diff_se;
  bool non_increasing_within_noise = false;
  double certified_horizon = kNaN;
  int n = 0;
  double L = 0.0, h = 0.0;
  int replicas = 0;
  std::vector<std::vector<double>> samples;  ///< per rho
};

/// Law of v_t(x) against Gamma_{a,1}(1) for each rho.
OnePointReport one_point_harness(const NonlinearitySpec& sigma, const OnePointConfig& cfg);

struct ProbeSpec {
  double t = 1.0, R = 0.0;
  double x = 0.0, y = 0.0;
};

/// Shared quadratic-variation time, on the q scale, of the martingales behind two
/// probes under constant sigma = 1 (exact at finite rho).
double shared_exponent(const ProbeSpec& a, const ProbeSpec& b, double rho);
/// log((t + R + rho)/(R + rho)) / L(1/rho).
double probe_exponent(const ProbeSpec& p, double rho);

struct MultipointHarnessConfig {
  std::vector<ProbeSpec> probes;
  double rho = 1e-2;
  double a = 0.0;
  int n = 128;
  double h = 0.0;
  int replicas = 400;
  int copies_per_dim = 1;
  std::uint64_t seed = 1;
  std::size_t ref_samples = 20000;
  int ref_steps = 200;
  std::shared_ptr<const Diffusivity> J;
};

struct MultipointHarnessReport {
  std::vector<ProbeSpec> probes;  ///< snapped to lattice nodes and step times
  TreeCorrelation p;              ///< after ultrametric closure
  std::vector<double> p_raw;
  double closure_adjustment = 0.0;
  std::vector<double> limit_exponent;
  std::vector<double> q_targets;
  std::vector<double> field_cov, field_cov_se, ref_cov, ref_cov_se;
  double max_cov_z = 0.0;
  bool cov_ok = false;
  double w2_joint = kNaN;
  std::string w2_method;
  std::size_t samples = 0;
  double dt = 0.0;
  long steps = 0;
  int n = 0;
  double L = 0.0, h = 0.0;
};

MultipointHarnessReport multipoint_harness(const NonlinearitySpec& sigma, const MultipointHarnessConfig& cfg);

}  // namespace decoupler
