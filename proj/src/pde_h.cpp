#include "pde_h.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace decoupler {

namespace {

int count_steps(double length, double step, const char* what) {
  const double r = length / step;
  const long n = std::lround(r);
  if (n < 1 || std::abs(r - double(n)) > 1e-9 * std::max(1.0, r)) {
    std::ostringstream os;
    os << what << ": " << length << " is not a positive multiple of " << step;
    fail(ErrorKind::Config, os.str());
  }
  return int(n);
}

HField empty_field(const PdeConfig& cfg) {
  require(cfg.b_max > cfg.b_min && cfg.h_b > 0.0 && cfg.Q0 > 0.0 && cfg.q_out > 0.0, "solve_h: bad grid");
  const int nb = count_steps(cfg.b_max - cfg.b_min, cfg.h_b, "solve_h b range") + 1;
  const int nq = count_steps(cfg.Q0, cfg.q_out, "solve_h Q0") + 1;
  require(nb >= 5, "solve_h: need at least five b nodes");
  HField H;
  H.field = DecouplingField(nq, cfg.q_out, nb, cfg.b_min, cfg.h_b);
  H.field.quantity = "H";
  H.field.provenance = "pde";
  H.kinks = cfg.kinks;
  return H;
}

}  // namespace

HField solve_h(const std::function<double(double)>& sigma_sq, const PdeConfig& cfg) {
  HField H = empty_field(cfg);
  DecouplingField& F = H.field;
  const int nb = F.nb;
  const double h = cfg.h_b, h2 = h * h;
  std::vector<double> u(nb), lap(nb), s2(nb);
  for (int j = 0; j < nb; ++j) {
    s2[j] = sigma_sq(F.b(j));
    if (!(s2[j] >= 0.0) || !std::isfinite(s2[j])) fail(ErrorKind::InvalidArgument, "solve_h: sigma^2 must be finite and >= 0");
    u[j] = s2[j];
    F.at(0, j) = u[j];
  }
  for (int j = 0; j < nb; ++j)
    if (s2[j] == 0.0) H.kinks.push_back(F.b(j));

  require(cfg.boundary == "quadratic" || cfg.boundary == "linear", "solve_h: boundary must be quadratic or linear");
  const bool quadratic_edge = cfg.boundary == "quadratic";
  double q = 0.0;
  H.min_dq = std::numeric_limits<double>::infinity();
  for (int out = 1; out < F.nq; ++out) {
    const double target = F.q(out);
    while (q < target) {
      double umax = 0.0;
      for (double v : u) umax = std::max(umax, v);
      double dq = umax > 0.0 ? cfg.cfl * h2 / umax : target - q;
      if (dq < cfg.dq_floor) {
        std::ostringstream os;
        os << "solve_h: stiff/blow-up, CFL step " << dq << " below floor at q = " << q << " (max H = " << umax << ")";
        fail(ErrorKind::Numerical, os.str());
      }
      bool last = false;
      if (q + dq >= target * (1.0 - 1e-14)) {
        dq = target - q;
        last = true;
      }
      for (int j = 1; j + 1 < nb; ++j) lap[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / h2;
      for (int j = 1; j + 1 < nb; ++j) {
        double v = u[j] + 0.5 * dq * u[j] * lap[j];
        if (v < 0.0) {
          ++H.floor_events;
          H.floor_max_sigma_sq = std::max(H.floor_max_sigma_sq, s2[j]);
          v = 0.0;
        }
        u[j] = v;
      }
      if (quadratic_edge) {
        u[0] = 3.0 * u[1] - 3.0 * u[2] + u[3];
        u[nb - 1] = 3.0 * u[nb - 2] - 3.0 * u[nb - 3] + u[nb - 4];
      } else {
        u[0] = 2.0 * u[1] - u[2];
        u[nb - 1] = 2.0 * u[nb - 2] - u[nb - 3];
      }
      if (u[0] < 0.0) u[0] = 0.0;
      if (u[nb - 1] < 0.0) u[nb - 1] = 0.0;
      for (double v : u)
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "solve_h: blow-up at q = " << q << "; last valid q = " << q;
          fail(ErrorKind::Numerical, os.str());
        }
      H.min_dq = std::min(H.min_dq, dq);
      H.max_dq = std::max(H.max_dq, dq);
      ++H.steps;
      q = last ? target : q + dq;
    }
    for (int j = 0; j < nb; ++j) F.at(out, j) = u[j];
  }
  return H;
}

HField hfield_from(const std::function<double(double, double)>& h, const PdeConfig& cfg) {
  HField H = empty_field(cfg);
  for (int i = 0; i < H.field.nq; ++i)
    for (int j = 0; j < H.field.nb; ++j) H.field.at(i, j) = h(H.field.q(i), H.field.b(j));
  return H;
}

ResidualReport residual_check(const HField& H) {
  const DecouplingField& F = H.field;
  require(F.nq >= 5, "residual_check: need at least five q slices");
  ResidualReport r;
  r.exclusion_radius = 3.0 * F.db;
  std::vector<char> keep(F.nb, 1);
  keep[0] = keep[F.nb - 1] = 0;
  for (int j = 0; j < F.nb; ++j)
    for (double k : H.kinks)
      if (std::abs(F.b(j) - k) <= r.exclusion_radius + 1e-12) keep[j] = 0;
  for (char c : keep) r.excluded_nodes += c ? 0 : 1;

  const double dq = F.dq, h2 = F.db * F.db;
  std::vector<double> sup(F.nq, 0.0);
  for (int i = 0; i < F.nq; ++i) {
    for (int j = 1; j + 1 < F.nb; ++j) {
      if (!keep[j]) continue;
      double dqH;
      if (i >= 2 && i + 2 < F.nq)
        dqH = (F.at(i - 2, j) - 8.0 * F.at(i - 1, j) + 8.0 * F.at(i + 1, j) - F.at(i + 2, j)) / (12.0 * dq);
      else if (i < 2)
        dqH = (-25.0 * F.at(i, j) + 48.0 * F.at(i + 1, j) - 36.0 * F.at(i + 2, j) + 16.0 * F.at(i + 3, j) -
               3.0 * F.at(i + 4, j)) /
              (12.0 * dq);
      else
        dqH = (25.0 * F.at(i, j) - 48.0 * F.at(i - 1, j) + 36.0 * F.at(i - 2, j) - 16.0 * F.at(i - 3, j) +
               3.0 * F.at(i - 4, j)) /
              (12.0 * dq);
      const double lap = (F.at(i, j + 1) - 2.0 * F.at(i, j) + F.at(i, j - 1)) / h2;
      const double res = std::abs(dqH - 0.5 * F.at(i, j) * lap);
      sup[i] = std::max(sup[i], res);
      r.max_abs = std::max(r.max_abs, res);
    }
  }
  for (int i = 0; i + 1 < F.nq; ++i) r.l1_linf += 0.5 * dq * (sup[i] + sup[i + 1]);
  return r;
}

CompareReport compare_to_decoupling(const HField& H, const DecouplingField& J,
                                    std::vector<std::pair<double, double>> probes) {
  const DecouplingField& F = H.field;
  const double qmax = std::min(F.horizon(), J.horizon());
  if (std::abs(F.horizon() - J.horizon()) > 1e-9 * (1.0 + qmax))
    fail(ErrorKind::Horizon, "compare_to_decoupling: horizon mismatch");
  const double blo = std::max(F.b0, J.b0), bhi = std::min(F.b_max(), J.b_max());
  if (probes.empty()) {
    for (int a = 0; a < 5; ++a)
      for (int c = 0; c < 10; ++c) probes.emplace_back(qmax * (a + 1) / 5.0, blo + (bhi - blo) * (c + 0.5) / 10.0);
  }
  CompareReport r;
  r.probes = probes.size();
  double se = 0.0;
  for (const auto& [q, b] : probes) {
    const double d = std::abs(std::sqrt(std::max(0.0, F.eval(q, b))) - J.eval(q, b)) / japanese(b);
    if (d > r.discrepancy) {
      r.discrepancy = d;
      r.worst_q = q;
      r.worst_b = b;
    }
    if (!J.stderr_values.empty()) {
      // stderr of the nearest stored node
      const int i = std::clamp(int(std::lround(q / J.dq)), 0, J.nq - 1);
      const int j = std::clamp(int(std::lround((b - J.b0) / J.db)), 0, J.nb - 1);
      se = std::max(se, J.se(i, j) / japanese(b));
    }
  }
  r.budget = 3.0 * (se + 1e-3);
  return r;
}

std::vector<double> sqrt_h_lipschitz(const HField& H) {
  const DecouplingField& F = H.field;
  std::vector<double> lip(F.nq, 0.0);
  for (int i = 0; i < F.nq; ++i)
    for (int j = 0; j + 1 < F.nb; ++j)
      lip[i] = std::max(lip[i], std::abs(std::sqrt(F.at(i, j + 1)) - std::sqrt(F.at(i, j))) / F.db);
  return lip;
}

}  // namespace decoupler
