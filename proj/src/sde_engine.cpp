#include "sde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace decoupler {

namespace {

[[noreturn]] void blow_up(std::size_t path, int step, double value) {
  std::ostringstream os;
  os << "blow-up guard: path " << path << " reached |Theta| = " << value << " at step " << step;
  fail(ErrorKind::Numerical, os.str());
}

}  // namespace

SdeEnsemble solve_theta(const Diffusivity& g, const Vec& a, const ThetaConfig& cfg) {
  const int m = g.dim();
  require(a.size() == m, "solve_theta: initial value has wrong dimension");
  require(cfg.steps >= 1, "solve_theta: steps must be >= 1");
  require(cfg.Q >= 0.0, "solve_theta: negative horizon");
  if (cfg.Q > g.horizon() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "solve_theta: Q = " << cfg.Q << " exceeds diffusivity horizon " << g.horizon();
    fail(ErrorKind::Horizon, os.str());
  }

  SdeEnsemble ens;
  ens.m = m;
  ens.n = cfg.n_paths;
  ens.horizon = cfg.Q;
  ens.steps = cfg.steps;
  ens.seed = cfg.seed;
  ens.stream_tag = cfg.stream_tag;
  ens.endpoints.assign(ens.n * m, 0.0);
  ens.has_paths = cfg.record_paths;
  const std::size_t path_len = std::size_t(cfg.steps + 1) * m;
  const std::size_t inc_len = std::size_t(2 * cfg.steps) * m;
  if (cfg.record_paths) {
    ens.paths.assign(ens.n * path_len, 0.0);
    ens.increments.assign(ens.n * inc_len, 0.0);
  }

  const double dt = cfg.Q / cfg.steps;
  const double half_sd = std::sqrt(0.5 * dt);
  const double guard = 1e6 * (1.0 + a.norm());

  parallel_for(ens.n, 256, [&](std::size_t begin, std::size_t end) {
    Vec x(m), db(m), z(2 * m);
    for (std::size_t i = begin; i < end; ++i) {
      Stream st(cfg.seed, Domain::Theta, cfg.stream_tag, std::uint32_t(i));
      x = a;
      double* path = cfg.record_paths ? &ens.paths[i * path_len] : nullptr;
      double* inc = cfg.record_paths ? &ens.increments[i * inc_len] : nullptr;
      if (path) std::copy(x.data(), x.data() + m, path);
      for (int k = 0; k < cfg.steps; ++k) {
        st.fill_normal(z.data(), 2 * m, half_sd);
        const double q = k * dt;
        if (m == 1) {
          const double s = g.eval_scalar(cfg.Q - q, x(0));
          x(0) += s * (z(0) + z(1));
        } else {
          for (int c = 0; c < m; ++c) db(c) = z(c) + z(m + c);
          x += g.eval(cfg.Q - q, x) * db;
        }
        const double nx = x.norm();
        if (!(nx <= guard)) blow_up(i, k + 1, nx);
        if (path) {
          std::copy(x.data(), x.data() + m, path + std::size_t(k + 1) * m);
          std::copy(z.data(), z.data() + 2 * m, inc + std::size_t(2 * k) * m);
        }
      }
      std::copy(x.data(), x.data() + m, &ens.endpoints[i * m]);
    }
  });
  return ens;
}

double fixed_point_residual(const Diffusivity& g, const SdeEnsemble& ens, const Vec& a) {
  if (!ens.has_paths || ens.increments.empty())
    fail(ErrorKind::InvalidArgument, "fixed_point_residual: ensemble carries no stored increments");
  const int m = ens.m;
  require(a.size() == m, "fixed_point_residual: initial value has wrong dimension");
  const int steps = ens.steps;
  const double dt = ens.horizon / steps;
  const std::size_t path_len = std::size_t(steps + 1) * m;
  const std::size_t inc_len = std::size_t(2 * steps) * m;
  std::vector<double> sq(std::size_t(steps + 1), 0.0);
  std::vector<std::vector<double>> partial((ens.n + 255) / 256, std::vector<double>(steps + 1, 0.0));

  parallel_for(ens.n, 256, [&](std::size_t begin, std::size_t end) {
    auto& acc = partial[begin / 256];
    Vec y(m), xl(m), xr(m), xm(m), d1(m), d2(m);
    for (std::size_t i = begin; i < end; ++i) {
      const double* path = &ens.paths[i * path_len];
      const double* inc = &ens.increments[i * inc_len];
      y = a;
      for (int k = 0; k < steps; ++k) {
        for (int c = 0; c < m; ++c) {
          xl(c) = path[std::size_t(k) * m + c];
          xr(c) = path[std::size_t(k + 1) * m + c];
          d1(c) = inc[std::size_t(2 * k) * m + c];
          d2(c) = inc[std::size_t(2 * k + 1) * m + c];
        }
        xm = 0.5 * (xl + xr);
        const double q = k * dt;
        if (m == 1) {
          y(0) += g.eval_scalar(ens.horizon - q, xl(0)) * d1(0) +
                  g.eval_scalar(ens.horizon - q - 0.5 * dt, xm(0)) * d2(0);
        } else {
          y += g.eval(ens.horizon - q, xl) * d1 + g.eval(ens.horizon - q - 0.5 * dt, xm) * d2;
        }
        acc[k + 1] += (y - xr).squaredNorm();
      }
    }
  });
  for (const auto& acc : partial)
    for (int k = 0; k <= steps; ++k) sq[k] += acc[k];
  double worst = 0.0;
  for (double s : sq) worst = std::max(worst, std::sqrt(s / double(ens.n)));
  return worst;
}

TreeCorrelation::TreeCorrelation(int n_, double horizon_) : n(n_), horizon(horizon_), p(std::size_t(n_) * n_, 0.0) {
  require(n_ >= 1, "TreeCorrelation: need at least one path");
  for (int i = 0; i < n; ++i) p[std::size_t(i) * n + i] = horizon;
}

void TreeCorrelation::set(int i, int j, double v) {
  require(v >= 0.0 && v <= horizon, "TreeCorrelation: entry outside [0, horizon]");
  p[std::size_t(i) * n + j] = v;
  p[std::size_t(j) * n + i] = v;
}

void TreeCorrelation::validate() const {
  const double tol = 1e-12 * (1.0 + horizon);
  for (int i = 0; i < n; ++i) {
    require(std::abs((*this)(i, i) - horizon) <= tol, "TreeCorrelation: diagonal must equal the horizon");
    for (int j = 0; j < n; ++j) {
      require(std::abs((*this)(i, j) - (*this)(j, i)) <= tol, "TreeCorrelation: matrix is not symmetric");
      for (int k = 0; k < n; ++k) {
        if ((*this)(i, j) + tol < std::min((*this)(i, k), (*this)(k, j))) {
          std::ostringstream os;
          os << "TreeCorrelation: not ultrametric at (i,j,k) = (" << i << "," << j << "," << k << "): p(i,j) = "
             << (*this)(i, j) << " < min(p(i,k), p(k,j)) = " << std::min((*this)(i, k), (*this)(k, j));
          fail(ErrorKind::InvalidArgument, os.str());
        }
      }
    }
  }
}

TreeCorrelation ultrametric_closure(const TreeCorrelation& in, double* adjustment) {
  TreeCorrelation out = in;
  const int n = in.n;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double via = std::min(out(i, k), out(k, j));
        if (via > out(i, j)) out.p[std::size_t(i) * n + j] = via;
      }
  if (adjustment) {
    double d = 0.0;
    for (std::size_t t = 0; t < in.p.size(); ++t) d = std::max(d, out.p[t] - in.p[t]);
    *adjustment = d;
  }
  return out;
}

TreeSchedule tree_schedule(const TreeCorrelation& p, const std::vector<double>& q_grid) {
  p.validate();
  require(!q_grid.empty(), "tree_schedule: empty grid");
  TreeSchedule s;
  s.grid = q_grid;
  s.grid.push_back(0.0);
  const double top = *std::max_element(q_grid.begin(), q_grid.end());
  for (int i = 0; i < p.n; ++i)
    for (int j = i + 1; j < p.n; ++j)
      if (p(i, j) > 0.0 && p(i, j) < top) s.grid.push_back(p(i, j));
  std::sort(s.grid.begin(), s.grid.end());
  s.grid.erase(std::unique(s.grid.begin(), s.grid.end()), s.grid.end());
  require(s.grid.front() >= 0.0, "tree_schedule: negative grid node");
  const std::size_t intervals = s.grid.size() - 1;
  s.leader.assign(intervals, std::vector<int>(p.n, 0));
  for (std::size_t k = 0; k < intervals; ++k) {
    const double end = s.grid[k + 1];
    for (int i = 0; i < p.n; ++i) {
      int lead = i;
      for (int j = 0; j < i; ++j)
        if (p(i, j) >= end) {
          lead = j;
          break;
        }
      s.leader[k][i] = lead;
    }
  }
  return s;
}

std::size_t TreePaths::node(double q) const {
  auto it = std::lower_bound(grid.begin(), grid.end(), q);
  if (it == grid.end() || *it != q) fail(ErrorKind::InvalidArgument, "TreePaths::node: q is not a grid node");
  return std::size_t(it - grid.begin());
}

TreePaths tree_brownian(const TreeCorrelation& p, const std::vector<double>& q_grid, int m, std::uint64_t seed,
                        std::uint32_t replica) {
  const TreeSchedule s = tree_schedule(p, q_grid);
  TreePaths out;
  out.grid = s.grid;
  out.n = p.n;
  out.m = m;
  const std::size_t len = s.grid.size();
  out.values.assign(std::size_t(p.n) * len * m, 0.0);
  std::vector<Stream> streams;
  streams.reserve(p.n);
  for (int j = 0; j < p.n; ++j) streams.emplace_back(seed, Domain::Tree, replica, std::uint32_t(j));
  std::vector<double> z(std::size_t(p.n) * m);
  for (std::size_t k = 0; k + 1 < len; ++k) {
    const double sd = std::sqrt(s.grid[k + 1] - s.grid[k]);
    for (int j = 0; j < p.n; ++j) streams[j].fill_normal(&z[std::size_t(j) * m], m, sd);
    for (int i = 0; i < p.n; ++i) {
      const int lead = s.leader[k][i];
      for (int c = 0; c < m; ++c)
        out.values[(std::size_t(i) * len + k + 1) * m + c] =
            out.values[(std::size_t(i) * len + k) * m + c] + z[std::size_t(lead) * m + c];
    }
  }
  return out;
}

std::vector<double> solve_multipoint_psi(const Diffusivity& J, const TreeCorrelation& p,
                                         const std::vector<Vec>& initial_values,
                                         const std::vector<double>& q_targets, const MultipointConfig& cfg) {
  const int n = p.n;
  const int m = J.dim();
  require(int(initial_values.size()) == n && int(q_targets.size()) == n,
          "solve_multipoint_psi: need one initial value and target per path");
  require(cfg.steps >= 1, "solve_multipoint_psi: steps must be >= 1");
  for (int i = 0; i < n; ++i) {
    require(initial_values[i].size() == m, "solve_multipoint_psi: initial value has wrong dimension");
    require(q_targets[i] >= 0.0 && q_targets[i] <= p.horizon, "solve_multipoint_psi: target outside [0, horizon]");
    for (int j = 0; j < i; ++j)
      if (p(i, j) > 0.0 && (initial_values[i] - initial_values[j]).norm() != 0.0) {
        std::ostringstream os;
        os << "solve_multipoint_psi: paths " << j << " and " << i << " are correlated (p = " << p(i, j)
           << ") but have different initial values";
        fail(ErrorKind::InvalidArgument, os.str());
      }
  }
  if (p.horizon > J.horizon() * (1.0 + 1e-12)) fail(ErrorKind::Horizon, "solve_multipoint_psi: horizon exceeds J");

  const double top = *std::max_element(q_targets.begin(), q_targets.end());
  std::vector<double> base;
  for (int k = 0; k <= cfg.steps; ++k) base.push_back(top * k / cfg.steps);
  for (double q : q_targets) base.push_back(q);
  const TreeSchedule s = tree_schedule(p, base);
  const std::size_t intervals = s.grid.size() - 1;
  std::vector<double> out(cfg.n_samples * std::size_t(n) * m, 0.0);

  parallel_for(cfg.n_samples, 64, [&](std::size_t begin, std::size_t end) {
    std::vector<Vec> psi(n, Vec(m));
    std::vector<double> z(std::size_t(n) * m);
    Vec db(m);
    for (std::size_t r = begin; r < end; ++r) {
      std::vector<Stream> streams;
      streams.reserve(n);
      for (int j = 0; j < n; ++j) streams.emplace_back(cfg.seed, Domain::Tree, std::uint32_t(r), std::uint32_t(j));
      for (int i = 0; i < n; ++i) psi[i] = initial_values[i];
      for (std::size_t k = 0; k < intervals; ++k) {
        const double q0 = s.grid[k], q1 = s.grid[k + 1];
        const double sd = std::sqrt(q1 - q0);
        for (int j = 0; j < n; ++j) streams[j].fill_normal(&z[std::size_t(j) * m], m, sd);
        for (int i = 0; i < n; ++i) {
          if (q1 > q_targets[i]) continue;
          const int lead = s.leader[k][i];
          if (m == 1) {
            psi[i](0) += J.eval_scalar(p.horizon - q0, psi[i](0)) * z[lead];
          } else {
            for (int c = 0; c < m; ++c) db(c) = z[std::size_t(lead) * m + c];
            psi[i] += J.eval(p.horizon - q0, psi[i]) * db;
          }
          if (!std::isfinite(psi[i].norm())) blow_up(r, int(k), psi[i].norm());
        }
      }
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) out[(r * n + i) * m + c] = psi[i](c);
    }
  });
  return out;
}

}  // namespace decoupler
