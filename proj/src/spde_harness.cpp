#include "spde_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "decoupling.hpp"
#include "errors.hpp"
#include "oracles.hpp"
#include "parallel.hpp"
#include "psd_matrix.hpp"
#include "scales.hpp"

namespace decoupler {

namespace {

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  MeanSe r;
  if (x.empty()) return r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / double(x.size() - 1) / double(x.size()));
  }
  return r;
}

double torus_delta(double d, double L) {
  d = std::fmod(d, L);
  if (d > 0.5 * L) d -= L;
  if (d < -0.5 * L) d += L;
  return d;
}

int node_index(double x, double h, int n) {
  const long i = std::lround(x / h);
  return int(((i % n) + n) % n);
}

std::shared_ptr<const Diffusivity> reference_diffusivity(const NonlinearitySpec& sigma,
                                                         const std::shared_ptr<const Diffusivity>& given) {
  if (given) {
    if (given->horizon() < 1.0) fail(ErrorKind::Horizon, "reference decoupling function stops before horizon 1");
    return given;
  }
  return oracle_diffusivity(oracle_for(sigma), 1.0);
}

}  // namespace

long min_steps(double rho, double T) {
  require(T >= 0.0, "min_steps: negative end time");
  if (T == 0.0) return 0;
  return long(std::ceil(T / max_dt(rho) * (1.0 - 1e-12)));
}

std::vector<long> nested_steps(const std::vector<double>& rhos, double T) {
  require(!rhos.empty(), "nested_steps: empty rho list");
  std::vector<std::size_t> order(rhos.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return rhos[i] < rhos[j]; });
  std::vector<long> need(rhos.size());
  for (std::size_t i = 0; i < rhos.size(); ++i) need[i] = std::max(1L, min_steps(rhos[i], T));
  const long base = need[order[0]];
  std::vector<long> best;
  long best_total = -1;
  for (long N = base; N <= base + base / 10 + 10; ++N) {
    std::vector<long> chain(rhos.size());
    long prev = N, total = N;
    chain[order[0]] = N;
    bool ok = true;
    for (std::size_t r = 1; r < order.size() && ok; ++r) {
      long d = need[order[r]];
      while (d <= prev && prev % d != 0) ++d;
      if (d > prev) ok = false;
      chain[order[r]] = d;
      total += d;
      prev = d;
    }
    if (ok && (best_total < 0 || total < best_total)) {
      best_total = total;
      best = chain;
    }
  }
  return best;
}

std::vector<std::array<double, 2>> probe_layout(double L, double spacing, double h) {
  require(L > 0.0 && spacing > 0.0, "probe_layout: L and spacing must be positive");
  auto snap = [&](double x) { return h > 0.0 ? std::round(x / h) * h : x; };
  auto min_dist = [&](const std::vector<std::array<double, 2>>& p) {
    double best = L;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = i + 1; j < p.size(); ++j)
        best = std::min(best, std::hypot(torus_delta(p[i][0] - p[j][0], L), torus_delta(p[i][1] - p[j][1], L)));
    return best;
  };
  std::vector<std::array<double, 2>> best{{0.0, 0.0}};
  double best_gap = L;
  const int cmax = std::max(1, int(L / spacing));
  for (int C = 1; C <= cmax; ++C)
    for (int R = 1; R <= 2 * cmax + 1; ++R)
      for (int shift = 0; shift <= (R % 2 == 0 ? 1 : 0); ++shift) {
        std::vector<std::array<double, 2>> p;
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) {
            const double x = (c + (shift && (r % 2) ? 0.5 : 0.0)) * L / C;
            p.push_back({snap(x), snap(r * L / R)});
          }
        const double gap = min_dist(p);
        if (gap < spacing) continue;
        if (p.size() > best.size() || (p.size() == best.size() && gap > best_gap)) {
          best = p;
          best_gap = gap;
        }
      }
  return best;
}

bool quadratic_coefficients(const NonlinearitySpec& sigma, double* g2, double* g1, double* g0) {
  auto get = [&](const char* k, double d) {
    auto it = sigma.params.find(k);
    return it == sigma.params.end() ? d : it->second;
  };
  if (sigma.dim != 1) return false;
  double a2 = 0.0, a1 = 0.0, a0 = 0.0;
  if (sigma.family == "constant") {
    a0 = get("c", 1.0) * get("c", 1.0);
  } else if (sigma.family == "linear") {
    a2 = get("beta", 0.0) * get("beta", 0.0);
  } else if (sigma.family == "add_mult") {
    const double b2 = get("beta", 0.0) * get("beta", 0.0);
    a2 = b2;
    a0 = b2 * get("alpha", 1.0) * get("alpha", 1.0);
  } else {
    return false;
  }
  *g2 = a2;
  *g1 = a1;
  *g0 = a0;
  return true;
}

double scheme_quadratic_moment(const SpectralGrid& g, double rho, double dt, long steps, double a, double g2,
                               double g1, double g0) {
  const auto& k2 = g.k2();
  const int nh = g.nh();
  const std::size_t ns = g.spec_size();
  const double gam = scales::gamma_rho(rho);
  std::vector<double> d2(ns), inj(ns), w(ns), mu(ns, 0.0);
  for (std::size_t k = 0; k < ns; ++k) {
    const int j = int(k % nh);
    w[k] = (j == 0 || j == g.n() / 2) ? 1.0 : 2.0;
    d2[k] = std::exp(-dt * k2[k]);
    inj[k] = gam * gam * std::exp(-(rho + 0.5 * dt) * k2[k]) * dt / (g.L() * g.L());
  }
  mu[0] = a * a;
  auto second = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < ns; ++k) s += w[k] * mu[k];
    return s;
  };
  for (long s = 0; s < steps; ++s) {
    const double es2 = g2 * second() + g1 * a + g0;
    for (std::size_t k = 0; k < ns; ++k) mu[k] = d2[k] * mu[k] + inj[k] * es2;
  }
  return g2 * second() + g1 * a + g0;
}

void run_lockstep(const SpectralGrid& grid, const NonlinearitySpec& sigma, const Vec& a,
                  const std::vector<LockstepRun>& runs, std::uint64_t seed, std::uint32_t replica,
                  const std::function<void(std::size_t, const SpdeState&)>& on_finish) {
  const std::size_t R = runs.size();
  const int m = int(a.size());
  const std::size_t nv = grid.real_size() * m;
  double tmax = 0.0;
  for (const auto& r : runs) {
    require(r.T >= 0.0 && r.steps >= 0, "run_lockstep: negative end time or step count");
    require((r.T == 0.0) == (r.steps == 0), "run_lockstep: zero end time needs zero steps");
    tmax = std::max(tmax, r.T);
  }
  const double tol = 1e-12 * std::max(1.0, tmax);

  std::vector<double> bounds;
  for (const auto& r : runs)
    for (long k = 1; k <= r.steps; ++k) bounds.push_back(r.T * double(k) / double(r.steps));
  std::sort(bounds.begin(), bounds.end());
  std::vector<double> uni;
  for (double b : bounds)
    if (uni.empty() || b - uni.back() > tol) uni.push_back(b);

  std::vector<SpdeState> states;
  std::vector<long> next(R, 1);
  std::vector<bool> active(R, true), fresh(R, true);
  std::vector<RealBuffer> acc(R);
  for (std::size_t r = 0; r < R; ++r) {
    const double dt = runs[r].steps ? runs[r].T / double(runs[r].steps) : max_dt(runs[r].rho);
    states.push_back(SpdeState::constant(grid, runs[r].rho, dt, a));
    if (runs[r].steps == 0) {
      on_finish(r, states.back());
      active[r] = false;
    }
  }
  RealBuffer noise(nv);
  double prev = 0.0;
  for (std::size_t e = 0; e < uni.size(); ++e) {
    const double u = uni[e];
    Stream rng(seed, Domain::Spde, replica, std::uint32_t(e));
    rng.fill_normal(noise.data(), nv, std::sqrt(u - prev) / grid.h());
    for (std::size_t r = 0; r < R; ++r) {
      if (!active[r]) continue;
      const double boundary = runs[r].T * double(next[r]) / double(runs[r].steps);
      const bool hit = std::abs(u - boundary) <= tol;
      if (hit && fresh[r]) {
        spde_step(states[r], sigma, noise.data());
      } else {
        if (acc[r].size() != nv) acc[r] = RealBuffer(nv);
        if (fresh[r]) {
          std::memcpy(acc[r].data(), noise.data(), nv * sizeof(double));
        } else {
          for (std::size_t i = 0; i < nv; ++i) acc[r][i] += noise[i];
        }
        fresh[r] = false;
        if (hit) {
          spde_step(states[r], sigma, acc[r].data());
          fresh[r] = true;
        }
      }
      if (hit && ++next[r] > runs[r].steps) {
        on_finish(r, states[r]);
        active[r] = false;
      }
    }
    prev = u;
  }
}

JRhoReport estimate_j_sigma_rho(const NonlinearitySpec& sigma, const JRhoConfig& cfg) {
  require(!cfg.rhos.empty(), "estimate_j_sigma_rho: empty rho list");
  require(cfg.replicas >= 2, "estimate_j_sigma_rho: need at least two replicas");
  require(int(cfg.a.size()) == sigma.dim, "estimate_j_sigma_rho: initial value dimension mismatch");
  require(cfg.q >= 0.0 && cfg.q <= 1.0, "estimate_j_sigma_rho: q must lie in [0, 1]");
  const int m = sigma.dim;
  const double rho_min = *std::min_element(cfg.rhos.begin(), cfg.rhos.end());
  const double h = cfg.h > 0.0 ? cfg.h : max_spacing(rho_min);
  SpectralGrid grid(cfg.n, cfg.n * h);

  std::vector<LockstepRun> runs;
  for (double rho : cfg.rhos) {
    const double T = scales::t_rho(cfg.q, rho);
    runs.push_back({rho, T, min_steps(rho, T)});
  }
  const std::size_t R = runs.size(), reps = std::size_t(cfg.replicas);
  std::vector<Mat> means(reps * R);
  parallel_for(reps, 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t rep = b; rep < e; ++rep) {
      run_lockstep(grid, sigma, cfg.a, runs, cfg.seed, std::uint32_t(rep), [&](std::size_t r, const SpdeState& s) {
        const std::size_t n2 = grid.real_size();
        Mat acc = Mat::Zero(m, m);
        if (m == 1) {
          const auto v = s.field(0);
          double sum = 0.0;
          for (double x : v) {
            const double sv = sigma.scalar(x);
            sum += sv * sv;
          }
          acc(0, 0) = sum;
        } else {
          std::vector<std::vector<double>> comps;
          for (int c = 0; c < m; ++c) comps.push_back(s.field(c));
          Vec bvec(m);
          for (std::size_t i = 0; i < n2; ++i) {
            for (int c = 0; c < m; ++c) bvec[c] = comps[c][i];
            const Mat S = sigma.eval(bvec);
            acc += S * S;
          }
        }
        means[rep * R + r] = acc / double(n2);
      });
    }
  });

  JRhoReport rep;
  rep.n = grid.n();
  rep.L = grid.L();
  rep.h = grid.h();
  rep.replicas = cfg.replicas;
  OracleSpec oracle;
  bool has_oracle = false;
  if (m == 1) {
    try {
      oracle = oracle_for(sigma);
      rep.oracle = oracle_J(oracle, cfg.q, cfg.a[0]);
      has_oracle = true;
    } catch (const Error&) {
    }
  }
  double g2 = 0, g1 = 0, g0 = 0;
  const bool quad = quadratic_coefficients(sigma, &g2, &g1, &g0);
  std::vector<std::vector<double>> s2(R);
  for (std::size_t r = 0; r < R; ++r) {
    JRhoRow row;
    row.rho = runs[r].rho;
    row.T = runs[r].T;
    row.steps = runs[r].steps;
    row.dt = runs[r].steps ? runs[r].T / double(runs[r].steps) : 0.0;
    Mat mean = Mat::Zero(m, m);
    for (std::size_t k = 0; k < reps; ++k) mean += means[k * R + r];
    mean /= double(reps);
    row.J = psd_sqrt(mean);
    row.J_scalar = row.J(0, 0);
    for (std::size_t k = 0; k < reps; ++k) s2[r].push_back(means[k * R + r](0, 0));
    const MeanSe ms = mean_se(s2[r]);
    row.mean_sigma_sq = ms.mean;
    row.se_sigma_sq = ms.se;
    if (m == 1) row.stderr_ = row.J_scalar > 0.0 ? ms.se / (2.0 * row.J_scalar) : ms.se;
    if (quad && m == 1) {
      row.scheme_reference =
          row.steps ? std::sqrt(scheme_quadratic_moment(grid, row.rho, row.dt, row.steps, cfg.a[0], g2, g1, g0))
                    : std::sqrt(g2 * cfg.a[0] * cfg.a[0] + g1 * cfg.a[0] + g0);
    }
    if (has_oracle) row.oracle_gap = std::abs(row.J_scalar - rep.oracle);
    rep.rows.push_back(row);
  }
  for (std::size_t r = 0; r + 1 < R; ++r) {
    const double Ja = rep.rows[r].J_scalar, Jb = rep.rows[r + 1].J_scalar;
    std::vector<double> d(reps);
    for (std::size_t k = 0; k < reps; ++k)
      d[k] = s2[r + 1][k] / (2.0 * std::max(Jb, 1e-300)) - s2[r][k] / (2.0 * std::max(Ja, 1e-300));
    rep.diff.push_back(Jb - Ja);
    rep.diff_se.push_back(mean_se(d).se);
  }
  if (has_oracle) {
    std::vector<JRhoRow> sorted = rep.rows;
    std::sort(sorted.begin(), sorted.end(), [](const JRhoRow& x, const JRhoRow& y) { return x.rho > y.rho; });
    rep.monotone_toward_oracle = true;
    for (std::size_t r = 0; r + 1 < sorted.size(); ++r)
      if (sorted[r + 1].oracle_gap > sorted[r].oracle_gap) rep.monotone_toward_oracle = false;
  }
  return rep;
}

OnePointReport one_point_harness(const NonlinearitySpec& sigma, const OnePointConfig& cfg) {
  require(sigma.dim == 1, "one_point_harness: scalar nonlinearity required");
  require(!cfg.rhos.empty(), "one_point_harness: empty rho list");
  require(cfg.t > 0.0, "one_point_harness: t must be positive");
  require(cfg.replicas >= 1, "one_point_harness: need at least one replica");
  OnePointReport rep;
  if (cfg.require_certificate) {
    std::vector<double> grid_pts;
    for (int i = 0; i <= 800; ++i) grid_pts.push_back(-20.0 + 0.05 * i);
    const auto hr = hypothesis_check(sigma, grid_pts);
    rep.certified_horizon = hr.certificate ? hr.certified_horizon : 0.0;
    const bool field_ok = cfg.J && cfg.J->horizon() > 1.0;
    if (!(rep.certified_horizon > 1.0) && !field_ok)
      fail(ErrorKind::Config, "one_point_harness: no certificate for horizon > 1 (" + hr.note + ")");
  }
  const auto J = reference_diffusivity(sigma, cfg.J);

  const double rho_min = *std::min_element(cfg.rhos.begin(), cfg.rhos.end());
  const double h = cfg.h > 0.0 ? cfg.h : max_spacing(rho_min);
  SpectralGrid grid(cfg.n, cfg.n * h);
  rep.n = grid.n();
  rep.L = grid.L();
  rep.h = grid.h();
  rep.replicas = cfg.replicas;
  std::vector<long> steps = cfg.steps.empty() ? nested_steps(cfg.rhos, cfg.t) : cfg.steps;
  require(steps.size() == cfg.rhos.size(), "one_point_harness: steps list length mismatch");
  std::vector<LockstepRun> runs;
  for (std::size_t r = 0; r < cfg.rhos.size(); ++r) runs.push_back({cfg.rhos[r], cfg.t, steps[r]});

  rep.spacing = std::sqrt(scales::nu(rho_min) * cfg.t);
  rep.probes = probe_layout(grid.L(), rep.spacing, grid.h());
  const std::size_t P = rep.probes.size(), R = runs.size();
  std::vector<std::size_t> nodes;
  for (const auto& p : rep.probes)
    nodes.push_back(std::size_t(node_index(p[0], h, grid.n())) * grid.n() + node_index(p[1], h, grid.n()));

  const Vec a = Vec::Constant(1, cfg.a);
  std::vector<double> vals(std::size_t(cfg.replicas) * R * P);
  parallel_for(std::size_t(cfg.replicas), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      run_lockstep(grid, sigma, a, runs, cfg.seed, std::uint32_t(k), [&](std::size_t r, const SpdeState& s) {
        const auto v = s.field(0);
        for (std::size_t p = 0; p < P; ++p) vals[(k * R + r) * P + p] = v[nodes[p]];
      });
      if (cfg.progress) cfg.progress(int(k));
    }
  });

  ThetaConfig tc;
  tc.Q = 1.0;
  tc.steps = cfg.ref_steps;
  tc.n_paths = cfg.ref_paths;
  tc.seed = cfg.seed;
  tc.stream_tag = 0x0E1;
  const auto ref = solve_theta(*J, a, tc);
  const MeanSe rs = mean_se(ref.endpoints);
  rep.ref_mean = rs.mean;
  rep.ref_samples = ref.endpoints.size();
  {
    double ss = 0.0;
    for (double x : ref.endpoints) ss += (x - rs.mean) * (x - rs.mean);
    rep.ref_var = ss / double(ref.endpoints.size() - 1);
  }
  rep.samples.assign(R, {});
  for (std::size_t r = 0; r < R; ++r) {
    auto& smp = rep.samples[r];
    for (std::size_t k = 0; k < std::size_t(cfg.replicas); ++k)
      for (std::size_t p = 0; p < P; ++p) smp.push_back(vals[(k * R + r) * P + p]);
    OnePointRow row;
    row.rho = runs[r].rho;
    row.steps = runs[r].steps;
    row.dt = cfg.t / double(runs[r].steps);
    row.samples = smp.size();
    row.w2 = wasserstein2(smp, ref.endpoints, 1).value;
    const MeanSe ms = mean_se(smp);
    row.mean = ms.mean;
    double ss = 0.0;
    for (double x : smp) ss += (x - ms.mean) * (x - ms.mean);
    row.var = smp.size() > 1 ? ss / double(smp.size() - 1) : 0.0;
    if (sigma.family == "constant") {
      const double c = std::abs(sigma.scalar(cfg.a));
      row.gaussian_w2 = c * std::abs(std::sqrt(scales::s_rho(cfg.t, row.rho)) - 1.0);
    }
    rep.rows.push_back(row);
  }
  std::vector<std::size_t> order(R);
  for (std::size_t r = 0; r < R; ++r) order[r] = r;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rep.rows[x].rho > rep.rows[y].rho; });
  rep.non_increasing = true;
  for (std::size_t r = 0; r + 1 < R; ++r) {
    rep.w2_diff.push_back(rep.rows[order[r + 1]].w2 - rep.rows[order[r]].w2);
    if (rep.w2_diff.back() > 0.0) rep.non_increasing = false;
  }

  // Resample whole replicas, the same draw for every rho, so the common noise cancels.
  std::vector<double> ref_sorted = ref.endpoints;
  std::sort(ref_sorted.begin(), ref_sorted.end());
  const std::size_t nrep = std::size_t(cfg.replicas);
  std::vector<std::vector<double>> boot_diff(R > 0 ? R - 1 : 0);
  Stream bs(cfg.seed, Domain::Bootstrap, 0);
  std::vector<double> smp(nrep * P), w2b(R);
  for (int b = 0; b < cfg.bootstrap && nrep > 1; ++b) {
    std::vector<std::size_t> pick(nrep);
    for (auto& k : pick) k = std::min(nrep - 1, std::size_t(bs.uniform() * double(nrep)));
    for (std::size_t r = 0; r < R; ++r) {
      std::size_t i = 0;
      for (std::size_t k : pick)
        for (std::size_t p = 0; p < P; ++p) smp[i++] = vals[(k * R + order[r]) * P + p];
      std::sort(smp.begin(), smp.end());
      w2b[r] = std::sqrt(std::max(0.0, w2_sq_presorted(smp, ref_sorted)));
    }
    for (std::size_t r = 0; r + 1 < R; ++r) boot_diff[r].push_back(w2b[r + 1] - w2b[r]);
  }
  rep.non_increasing_within_noise = true;
  for (std::size_t r = 0; r + 1 < R; ++r) {
    double se = kNaN;
    if (boot_diff[r].size() > 1) {
      const MeanSe ms = mean_se(boot_diff[r]);
      se = ms.se * std::sqrt(double(boot_diff[r].size()));
    }
    rep.w2_diff_se.push_back(se);
    if (!(rep.w2_diff[r] <= 3.0 * (std::isnan(se) ? 0.0 : se))) rep.non_increasing_within_noise = false;
  }
  return rep;
}

double probe_exponent(const ProbeSpec& p, double rho) {
  require(p.t >= 0.0 && p.R >= 0.0, "probe_exponent: negative time or radius");
  return std::log((p.t + p.R + rho) / (p.R + rho)) / scales::log_scale(1.0 / rho);
}

double shared_exponent(const ProbeSpec& a, const ProbeSpec& b, double rho) {
  const double T1a = a.t + a.R, T1b = b.t + b.R;
  const double tmin = std::min(a.t, b.t);
  const double c = 0.5 * ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
  const double w1 = T1a + T1b + 2.0 * rho;
  const double w0 = T1a + T1b - 2.0 * tmin + 2.0 * rho;
  const double Lr = scales::log_scale(1.0 / rho);
  if (c == 0.0) return std::log(w1 / w0) / Lr;
  auto e1 = [](double x) { return x > 700.0 ? 0.0 : -std::expint(-x); };
  return (e1(c / w1) - e1(c / w0)) / Lr;
}

MultipointHarnessReport multipoint_harness(const NonlinearitySpec& sigma, const MultipointHarnessConfig& cfg) {
  require(sigma.dim == 1, "multipoint_harness: scalar nonlinearity required");
  require(!cfg.probes.empty(), "multipoint_harness: no probes");
  require(cfg.replicas >= 2, "multipoint_harness: need at least two replicas");
  require(cfg.copies_per_dim >= 1, "multipoint_harness: copies_per_dim must be >= 1");
  const auto J = reference_diffusivity(sigma, cfg.J);
  const double rho = cfg.rho;
  const double h = cfg.h > 0.0 ? cfg.h : max_spacing(rho);
  SpectralGrid grid(cfg.n, cfg.n * h);
  const int n = grid.n();
  const std::size_t N = cfg.probes.size();

  MultipointHarnessReport rep;
  rep.n = n;
  rep.L = grid.L();
  rep.h = h;
  double tmax = 0.0;
  for (const auto& p : cfg.probes) {
    require(p.t > 0.0 && p.R >= 0.0, "multipoint_harness: probe needs t > 0 and R >= 0");
    tmax = std::max(tmax, p.t);
  }
  rep.steps = min_steps(rho, tmax);
  rep.dt = tmax / double(rep.steps);
  std::vector<long> kstep(N);
  std::vector<int> ix(N), iy(N);
  for (std::size_t i = 0; i < N; ++i) {
    ProbeSpec p = cfg.probes[i];
    kstep[i] = std::max(1L, std::lround(p.t / rep.dt));
    p.t = kstep[i] * rep.dt;
    ix[i] = node_index(p.x, h, n);
    iy[i] = node_index(p.y, h, n);
    p.x = ix[i] * h;
    p.y = iy[i] * h;
    rep.probes.push_back(p);
  }

  rep.p = TreeCorrelation(int(N), 1.0);
  rep.p_raw.assign(N * N, 1.0);
  rep.limit_exponent.assign(N * N, 1.0);
  const double nu = scales::nu(rho);
  for (std::size_t i = 0; i < N; ++i) {
    const double q = probe_exponent(rep.probes[i], rho);
    if (q > 1.0 + 1e-12) fail(ErrorKind::Horizon, "multipoint_harness: probe exponent exceeds horizon 1");
    rep.q_targets.push_back(std::min(q, 1.0));
    for (std::size_t j = i + 1; j < N; ++j) {
      ProbeSpec a = rep.probes[i], b = rep.probes[j];
      b.x = a.x + torus_delta(b.x - a.x, grid.L());
      b.y = a.y + torus_delta(b.y - a.y, grid.L());
      const double s = std::clamp(shared_exponent(a, b, rho), 0.0, 1.0);
      rep.p_raw[i * N + j] = rep.p_raw[j * N + i] = s;
      rep.p.set(int(i), int(j), s);
      const double dx2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
      const double D = std::max(std::abs(a.t + a.R - b.t - b.R), dx2 / (32.0 * nu));
      const double le = std::clamp(std::log(std::max(rho, D)) / std::log(rho), 0.0, 1.0);
      rep.limit_exponent[i * N + j] = rep.limit_exponent[j * N + i] = le;
    }
  }
  rep.p = ultrametric_closure(rep.p, &rep.closure_adjustment);

  std::vector<long> times(kstep.begin(), kstep.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const int C = cfg.copies_per_dim;
  const std::size_t copies = std::size_t(C) * C;
  const std::size_t reps = std::size_t(cfg.replicas);
  std::vector<double> samples(reps * copies * N);
  const bool constant = sigma.family == "constant";
  const Mat cmat = Mat::Constant(1, 1, constant ? std::abs(sigma.scalar(0.0)) : 0.0);
  const Vec a0 = Vec::Constant(1, cfg.a);

  parallel_for(reps, 1, [&](std::size_t b, std::size_t e) {
    std::vector<double> field(grid.real_size());
    ComplexBuffer tmp(grid.spec_size());
    RealBuffer out(grid.real_size());
    for (std::size_t rep_i = b; rep_i < e; ++rep_i) {
      SpdeState s = SpdeState::constant(grid, rho, rep.dt, a0);
      long cur = 0;
      for (long k : times) {
        if (constant) {
          Stream rng(cfg.seed, Domain::Spde, std::uint32_t(rep_i), std::uint32_t(k));
          spde_advance_constant(s, cmat, int(k - cur), rng);
        } else {
          for (long st = cur; st < k; ++st) {
            Stream rng(cfg.seed, Domain::Spde, std::uint32_t(rep_i), std::uint32_t(st));
            spde_step(s, sigma, rng);
          }
        }
        cur = k;
        std::map<double, std::vector<std::size_t>> by_r;
        for (std::size_t i = 0; i < N; ++i)
          if (kstep[i] == k) by_r[rep.probes[i].R].push_back(i);
        for (const auto& [R, idx] : by_r) {
          const auto& k2 = grid.k2();
          for (std::size_t t = 0; t < grid.spec_size(); ++t) tmp[t] = s.spectrum(0)[t] * std::exp(-0.5 * R * k2[t]);
          grid.inverse(tmp.data(), out.data());
          for (std::size_t cp = 0; cp < copies; ++cp) {
            const int ox = int(cp / C) * n / C, oy = int(cp % C) * n / C;
            for (std::size_t i : idx) {
              const std::size_t node = std::size_t((ix[i] + ox) % n) * n + (iy[i] + oy) % n;
              samples[(rep_i * copies + cp) * N + i] = out[node];
            }
          }
        }
      }
    }
  });
  rep.samples = reps * copies;

  MultipointConfig mc;
  mc.steps = cfg.ref_steps;
  mc.n_samples = cfg.ref_samples;
  mc.seed = cfg.seed ^ 0x4D50ull;
  const std::vector<Vec> init(N, a0);
  const auto ref = solve_multipoint_psi(*J, rep.p, init, rep.q_targets, mc);

  rep.field_cov.assign(N * N, 0.0);
  rep.field_cov_se.assign(N * N, 0.0);
  rep.ref_cov.assign(N * N, 0.0);
  rep.ref_cov_se.assign(N * N, 0.0);
  rep.cov_ok = true;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i; j < N; ++j) {
      std::vector<double> per_rep(reps, 0.0);
      for (std::size_t r = 0; r < reps; ++r) {
        double acc = 0.0;
        for (std::size_t cp = 0; cp < copies; ++cp) {
          const double* row = &samples[(r * copies + cp) * N];
          acc += (row[i] - cfg.a) * (row[j] - cfg.a);
        }
        per_rep[r] = acc / double(copies);
      }
      const MeanSe f = mean_se(per_rep);
      std::vector<double> rp(cfg.ref_samples);
      for (std::size_t r = 0; r < cfg.ref_samples; ++r) rp[r] = (ref[r * N + i] - cfg.a) * (ref[r * N + j] - cfg.a);
      const MeanSe g = mean_se(rp);
      for (auto [x, y] : {std::pair{i, j}, std::pair{j, i}}) {
        rep.field_cov[x * N + y] = f.mean;
        rep.field_cov_se[x * N + y] = f.se;
        rep.ref_cov[x * N + y] = g.mean;
        rep.ref_cov_se[x * N + y] = g.se;
      }
      const double se = std::hypot(f.se, g.se);
      const double z = se > 0.0 ? std::abs(f.mean - g.mean) / se : (f.mean == g.mean ? 0.0 : INFINITY);
      rep.max_cov_z = std::max(rep.max_cov_z, z);
      if (z > 3.0) rep.cov_ok = false;
    }

  const std::size_t nw = std::min<std::size_t>({1024, rep.samples, cfg.ref_samples});
  std::vector<double> fa(samples.begin(), samples.begin() + long(nw * N));
  std::vector<double> fb(ref.begin(), ref.begin() + long(nw * N));
  const auto w = wasserstein2(fa, fb, int(N), cfg.seed);
  rep.w2_joint = w.value;
  rep.w2_method = w.method;
  return rep;
}

}  // namespace decoupler
