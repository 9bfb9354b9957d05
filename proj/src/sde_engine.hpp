#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nonlinearity.hpp"

namespace decoupler {

/// Monte Carlo sample set of SDE endpoints, optionally with full paths and the
/// half-step Brownian increments that produced them.
struct SdeEnsemble {
  int m = 1;
  std::size_t n = 0;
  std::vector<double> endpoints;  ///< n x m, row-major

  double horizon = 0.0;  ///< Q of the solve
  int steps = 0;
  bool has_paths = false;
  std::vector<double> paths;       ///< n x (steps + 1) x m
  std::vector<double> increments;  ///< n x (2 steps) x m, two half-steps per step

  std::uint64_t seed = 0;
  std::uint32_t stream_tag = 0;
  std::string scheme = "euler-maruyama";

  double endpoint(std::size_t i, int c = 0) const { return endpoints[i * m + c]; }
  double path(std::size_t i, int k, int c = 0) const { return paths[(i * (steps + 1) + k) * m + c]; }
};

struct ThetaConfig {
  double Q = 1.0;
  int steps = 100;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  std::uint32_t stream_tag = 0;  ///< paths with equal (seed, tag, index) share increments
  bool record_paths = false;
};

/// Euler-Maruyama solve of d Theta = g(Q - q, Theta) dB, Theta(0) = a, with equal steps
/// and g evaluated at the left endpoint. Each step's increment is the sum of two
/// half-step normals from the path's own counter stream.
SdeEnsemble solve_theta(const Diffusivity& g, const Vec& a, const ThetaConfig& cfg);

/// sup over grid nodes of the L2(sample) distance between the stored path and
/// a + int_0^q g(Q - p, X(p)) dB(p) recomputed on the half-step grid, with X at
/// half-step nodes taken by linear interpolation of the stored path.
double fixed_point_residual(const Diffusivity& g, const SdeEnsemble& ens, const Vec& a);

/// Symmetric matrix p^{(i,j)} of separation times; diagonal equals the horizon.
struct TreeCorrelation {
  int n = 0;
  double horizon = 1.0;
  std::vector<double> p;  ///< n x n

  TreeCorrelation() = default;
  TreeCorrelation(int n, double horizon);
  double operator()(int i, int j) const { return p[std::size_t(i) * n + j]; }
  void set(int i, int j, double v);
  /// Throws ErrorKind::InvalidArgument naming a violating triple when not ultrametric.
  void validate() const;
};

/// Smallest ultrametric dominating p (max-min path closure); returns the largest
/// entry change through `adjustment` when non-null.
TreeCorrelation ultrametric_closure(const TreeCorrelation& p, double* adjustment = nullptr);

/// Refined grid and, per grid interval, the class leader (smallest index in the
/// equivalence class i ~ j iff p^{(i,j)} >= interval end) of every path.
struct TreeSchedule {
  std::vector<double> grid;
  std::vector<std::vector<int>> leader;  ///< [interval][path]
};

TreeSchedule tree_schedule(const TreeCorrelation& p, const std::vector<double>& q_grid);

/// N correlated m-dimensional Brownian paths on the refined grid for one replica.
struct TreePaths {
  std::vector<double> grid;
  int n = 0;
  int m = 1;
  std::vector<double> values;  ///< n x grid.size() x m
  double at(int i, std::size_t k, int c = 0) const { return values[(std::size_t(i) * grid.size() + k) * m + c]; }
  /// Index of the grid node equal to q (throws if q is not a node).
  std::size_t node(double q) const;
};

TreePaths tree_brownian(const TreeCorrelation& p, const std::vector<double>& q_grid, int m, std::uint64_t seed,
                        std::uint32_t replica = 0);

/// Joint samples of (Psi^{(i)}(q_i))_i for d Psi^{(i)} = J(horizon - q, Psi^{(i)}) dB^{(i)} driven
/// by tree-correlated Brownian motions. Output is n_samples x (N m), row-major.
struct MultipointConfig {
  int steps = 200;  ///< uniform steps over [0, max target] before refinement
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
};

std::vector<double> solve_multipoint_psi(const Diffusivity& J, const TreeCorrelation& p,
                                         const std::vector<Vec>& initial_values,
                                         const std::vector<double>& q_targets, const MultipointConfig& cfg);

struct W2Result {
  double value = 0.0;
  std::string method;  ///< "sorted", "assignment" or "sliced"
  int directions = 0;
};

/// Empirical Wasserstein-2 distance. Samples are row-major with m columns.
/// m = 1 uses the exact quantile coupling (unequal sizes allowed); m > 1 needs equal
/// sizes and uses an exact assignment for n <= 1024, sliced W2 otherwise.
W2Result wasserstein2(const std::vector<double>& a, const std::vector<double>& b, int m,
                      std::uint64_t seed = 7, int directions = 128);

/// W2^2 between two empirical measures on the line, both already sorted ascending.
double w2_sq_presorted(const std::vector<double>& a, const std::vector<double>& b);

/// Ensemble export: CSV (one row per sample) and the SDE1 binary container
/// ("SDE1", uint32 m, uint64 n, then n*m little-endian float64).
void write_ensemble_csv(const std::string& path, const std::vector<double>& data, int m);
void write_sde1(const std::string& path, const std::vector<double>& data, int m);
std::vector<double> read_sde1(const std::string& path, int* m_out);

}  // namespace decoupler
