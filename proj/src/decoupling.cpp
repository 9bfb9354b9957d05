#include "decoupling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace decoupler {

namespace {

constexpr std::uint32_t kPicardTag = 0x50494341u;  // shared increments for every node and iterate

int grid_count(double length, double step, const char* what) {
  const double r = length / step;
  const long n = std::lround(r);
  if (std::abs(r - double(n)) > 1e-9 * std::max(1.0, r)) {
    std::ostringstream os;
    os << what << ": " << length << " is not a multiple of the step " << step;
    fail(ErrorKind::Config, os.str());
  }
  return int(n);
}

}  // namespace

QOperatorResult q_operator(const NonlinearitySpec& sigma, const Diffusivity& g, double Q, const Vec& a,
                           const ThetaConfig& mc) {
  ThetaConfig cfg = mc;
  cfg.Q = Q;
  cfg.record_paths = false;
  const SdeEnsemble ens = solve_theta(g, a, cfg);
  const int m = ens.m;
  QOperatorResult r;
  if (m == 1) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < ens.n; ++i) {
      const double v = sigma.scalar(ens.endpoints[i]);
      s1 += v * v;
      s2 += v * v * v * v;
    }
    const double n = double(ens.n);
    const double mean = s1 / n;
    const double var = std::max(0.0, s2 / n - mean * mean) * n / std::max(1.0, n - 1.0);
    const double se_mean = std::sqrt(var / n);
    const double j = psd_sqrt(mean);
    r.value = Mat::Constant(1, 1, j);
    r.stderr_ = j > 0.0 ? se_mean / (2.0 * j) : std::sqrt(se_mean);
    return r;
  }
  Mat mean = Mat::Zero(m, m), sq = Mat::Zero(m, m);
  Vec x(m);
  for (std::size_t i = 0; i < ens.n; ++i) {
    for (int c = 0; c < m; ++c) x(c) = ens.endpoints[i * m + c];
    const Mat s = sigma(x);
    const Mat s2 = s * s;
    mean += s2;
    sq += s2.cwiseProduct(s2);
  }
  const double n = double(ens.n);
  mean /= n;
  sq /= n;
  const Mat var = (sq - mean.cwiseProduct(mean)).cwiseMax(0.0);
  const double se_frob = std::sqrt(var.sum() / n);
  r.value = psd_sqrt(mean);
  // Powers-Stormer: |sqrt A - sqrt B|_F^2 <= |A - B|_* <= sqrt(m) |A - B|_F.
  r.stderr_ = std::sqrt(std::sqrt(double(m)) * se_frob);
  return r;
}

DecouplingField picard_solve(const NonlinearitySpec& sigma, const GridConfig& grid, const McConfig& mc,
                             PicardReport* report) {
  require(sigma.dim == 1, "picard_solve: grid mode needs m = 1");
  require(grid.Q0 > 0.0 && grid.q_step > 0.0 && grid.B > 0.0 && grid.db > 0.0, "picard_solve: bad grid");
  require(mc.n_paths >= 2 && mc.steps_per_unit >= 1, "picard_solve: bad Monte Carlo budget");
  const double lam = sigma.lipschitz;
  if (lam > 0.0 && !(grid.Q0 < 1.0 / (lam * lam))) {
    std::ostringstream os;
    os << "picard_solve: Q0 = " << grid.Q0 << " must be below Lip(sigma)^-2 = " << 1.0 / (lam * lam);
    fail(ErrorKind::Horizon, os.str());
  }

  const int nq = grid_count(grid.Q0, grid.q_step, "picard_solve Q0") + 1;
  const int nb = grid_count(2.0 * grid.B, grid.db, "picard_solve 2B") + 1;
  const double dt = 1.0 / mc.steps_per_unit;
  const int s = grid_count(grid.q_step, dt, "picard_solve q_step");
  const int kmax = (nq - 1) * s;
  const std::size_t n = mc.n_paths;
  const double b0 = -grid.B, inv_db = 1.0 / grid.db;

  // Increments z[k * n + p], generated once per path stream.
  std::vector<double> z(std::size_t(kmax) * n);
  parallel_for(n, 1024, [&](std::size_t begin, std::size_t end) {
    std::vector<double> buf(kmax);
    for (std::size_t p = begin; p < end; ++p) {
      Stream st(mc.seed, Domain::Theta, kPicardTag, std::uint32_t(p));
      st.fill_normal(buf.data(), buf.size(), std::sqrt(dt));
      for (int k = 0; k < kmax; ++k) z[std::size_t(k) * n + p] = buf[k];
    }
  });

  DecouplingField cur(nq, grid.q_step, nb, b0, grid.db);
  cur.provenance = "picard";
  std::vector<double> sig(nb);
  for (int j = 0; j < nb; ++j) sig[j] = sigma.scalar(cur.b(j));
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nb; ++j) cur.at(i, j) = sig[j];

  PicardReport rep;
  std::vector<double> rows(std::size_t(kmax + 1) * nb);
  DecouplingField next = cur;
  next.stderr_values.assign(next.values.size(), 0.0);
  const double guard_base = 1e6;

  bool exact = false;  // an iterate reproduced itself bit for bit, so warm-up has nothing to do
  for (int it = 0; it < mc.max_iter; ++it) {
    const bool warm = it < mc.warmup_iters && !exact;
    const std::size_t np = warm ? std::min(n, std::max<std::size_t>(2, mc.warmup_paths)) : n;
    for (int L = 0; L <= kmax; ++L) cur.row_at(std::min(L * dt, cur.horizon()), &rows[std::size_t(L) * nb]);

    parallel_for(std::size_t(nb), 1, [&](std::size_t jb, std::size_t je) {
      std::vector<double> x(np);
      for (std::size_t j = jb; j < je; ++j) {
        const double b = cur.b(int(j));
        const double guard = guard_base * (1.0 + std::abs(b));
        next.at(0, int(j)) = sig[j];
        next.stderr_values[j] = 0.0;
        for (int i = 1; i < nq; ++i) {
          std::fill(x.begin(), x.end(), b);
          const int K = i * s;
          for (int k = 0; k < K; ++k) {
            const double* row = &rows[std::size_t(K - k) * nb];
            const double* zk = &z[std::size_t(k) * n];
            for (std::size_t p = 0; p < np; ++p) x[p] += interp_row(row, nb, b0, inv_db, x[p]) * zk[p];
          }
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t p = 0; p < np; ++p) {
            if (!(std::abs(x[p]) <= guard)) {
              std::ostringstream os;
              os << "picard_solve: blow-up guard at b = " << b << ", Q = " << cur.q(i) << ", path " << p;
              fail(ErrorKind::Numerical, os.str());
            }
            const double v = sigma.scalar(x[p]);
            s1 += v * v;
            s2 += v * v * v * v;
          }
          const double mean = s1 / double(np);
          const double var = std::max(0.0, s2 / double(np) - mean * mean) * double(np) / double(np - 1);
          const double jv = std::sqrt(std::max(0.0, mean));
          const double se_mean = std::sqrt(var / double(np));
          next.at(i, int(j)) = jv;
          next.stderr_values[std::size_t(i) * nb + j] = jv > 0.0 ? se_mean / (2.0 * jv) : std::sqrt(se_mean);
        }
      }
    });

    double change = 0.0;
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nb; ++j)
        change = std::max(change, std::abs(next.at(i, j) - cur.at(i, j)) / japanese(cur.b(j)));
    rep.residuals.push_back(change);
    rep.paths_used.push_back(np);
    rep.iterations = it + 1;
    cur.values = next.values;
    cur.stderr_values = next.stderr_values;
    const bool comparable = it > mc.warmup_iters || mc.warmup_iters == 0 || change == 0.0;
    if (change == 0.0) exact = true;
    if (!warm && comparable && change < mc.tol) {
      rep.converged = true;
      break;
    }
  }
  for (std::size_t k = std::size_t(mc.warmup_iters) + (mc.warmup_iters ? 1 : 0); k + 1 < rep.residuals.size(); ++k)
    if (rep.residuals[k] > 0.0)
      rep.worst_contraction = std::max(rep.worst_contraction, rep.residuals[k + 1] / rep.residuals[k]);
  cur.compute_lipschitz();
  rep.max_stderr = cur.max_stderr();
  const double top = cur.lipschitz.back();
  const double lam_bound = lam > 0.0 ? 1.0 / (lam * lam) : std::numeric_limits<double>::infinity();
  cur.qbar_lower = std::max(lam_bound, top > 0.0 ? cur.horizon() + 1.0 / (top * top)
                                                 : std::numeric_limits<double>::infinity());
  if (report) *report = rep;
  if (!rep.converged) {
    std::ostringstream os;
    os << "picard_solve: no convergence in " << rep.iterations << " iterations; X-norm changes:";
    for (double r : rep.residuals) os << " " << r;
    fail(ErrorKind::NotConverged, os.str());
  }
  return cur;
}

DecouplingField extend(const DecouplingField& J, double delta_q, const McConfig& mc, ExtendReport* report) {
  require(J.quantity == "J", "extend: field must hold J");
  require(delta_q >= 0.0, "extend: negative extension");
  require(std::abs(J.b0 + J.b_max()) <= 1e-12 * (1.0 + J.b_max()), "extend: b grid must be symmetric");
  ExtendReport rep;
  std::vector<double> top(J.values.end() - J.nb, J.values.end());
  NonlinearitySpec slice = make_tabulated(J.b0, J.db, top);
  rep.slice_lipschitz = slice.lipschitz;
  rep.allowed_step =
      slice.lipschitz > 0.0 ? 1.0 / (slice.lipschitz * slice.lipschitz) : std::numeric_limits<double>::infinity();
  rep.certified_horizon = J.horizon() + rep.allowed_step;
  if (delta_q == 0.0) {
    if (report) *report = rep;
    return J;
  }
  if (!(delta_q < rep.allowed_step)) {
    std::ostringstream os;
    os << "extend: step " << delta_q << " exceeds the certified maximum " << rep.allowed_step;
    fail(ErrorKind::Horizon, os.str());
  }
  GridConfig g;
  g.Q0 = delta_q;
  g.q_step = J.dq;
  g.B = J.b_max();
  g.db = J.db;
  const DecouplingField ext = picard_solve(slice, g, mc, &rep.picard);

  DecouplingField out(J.nq + ext.nq - 1, J.dq, J.nb, J.b0, J.db);
  out.provenance = "extend";
  std::copy(J.values.begin(), J.values.end(), out.values.begin());
  std::copy(ext.values.begin() + ext.nb, ext.values.end(), out.values.begin() + J.values.size());
  out.stderr_values.assign(out.values.size(), 0.0);
  if (!J.stderr_values.empty()) std::copy(J.stderr_values.begin(), J.stderr_values.end(), out.stderr_values.begin());
  for (std::size_t t = J.nb; t < ext.stderr_values.size(); ++t)
    out.stderr_values[J.values.size() + t - J.nb] = ext.stderr_values[t];
  out.compute_lipschitz();
  out.qbar_lower = std::isnan(J.qbar_lower) ? rep.certified_horizon : std::max(J.qbar_lower, rep.certified_horizon);
  if (report) *report = rep;
  return out;
}

DecouplingField rescale(const DecouplingField& J, double zeta) {
  require(zeta > 0.0 && std::isfinite(zeta), "rescale: zeta must be positive");
  require(J.quantity == "J", "rescale: field must hold J");
  DecouplingField out = J;
  out.provenance = "rescale";
  out.dq = J.dq / (zeta * zeta);
  for (double& v : out.values) v *= zeta;
  for (double& v : out.stderr_values) v *= zeta;
  for (double& v : out.lipschitz) v *= zeta;
  out.qbar_lower = J.qbar_lower / (zeta * zeta);
  return out;
}

ZeroSetReport zero_set_check(const DecouplingField& J, const NonlinearitySpec& sigma, double tol,
                             double tol_propagated) {
  ZeroSetReport r;
  for (int j = 0; j < J.nb; ++j) {
    const double b = J.b(j);
    const double s = std::abs(sigma.scalar(b));
    double jmax = 0.0, jmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < J.nq; ++i) {
      jmax = std::max(jmax, std::abs(J.at(i, j)));
      jmin = std::min(jmin, std::abs(J.at(i, j)));
    }
    if (s <= tol) {
      r.zeros.push_back(b);
      r.max_on_zero_set = std::max(r.max_on_zero_set, jmax);
      if (jmax > tol_propagated) r.lost_zeros.push_back(b);
    } else if (jmin <= tol) {
      r.spurious_zeros.push_back(b);
    }
  }
  r.ok = r.lost_zeros.empty() && r.spurious_zeros.empty();
  return r;
}

double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
  require(!x.empty(), "ks_distance: empty sample");
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return d;
}

CauchyReport cauchy_limit_ks(double alpha, double beta, double r, double a, std::size_t n, int steps,
                             std::uint64_t seed) {
  require(alpha > 0.0 && r > 0.0, "cauchy_limit_ks: need alpha > 0 and r > 0");
  const double a2 = alpha * alpha;
  FunctionDiffusivity g(
      1, std::numeric_limits<double>::infinity(),
      [a2](double, const Vec& x) { return Mat::Constant(1, 1, std::sqrt(a2 + x(0) * x(0))); },
      [a2](double, double x) { return std::sqrt(a2 + x * x); }, 1.0);
  ThetaConfig cfg;
  cfg.Q = r;
  cfg.steps = steps;
  cfg.n_paths = n;
  cfg.seed = seed;
  cfg.stream_tag = 0xCA0C;
  Vec x0(1);
  x0(0) = a;
  const SdeEnsemble ens = solve_theta(g, x0, cfg);
  CauchyReport rep;
  rep.r = r;
  rep.n = n;
  rep.steps = steps;
  rep.implied_r = (beta > 0.0 && beta < 1.0) ? -std::log1p(-beta * beta) : std::numeric_limits<double>::infinity();
  rep.ks = ks_distance(ens.endpoints, [alpha](double x) { return 0.5 + std::atan(x / alpha) / std::numbers::pi; });
  return rep;
}

}  // namespace decoupler
