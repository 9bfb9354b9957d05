#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "decoupling.hpp"
#include "errors.hpp"

namespace decoupler {

namespace {

// Least-squares slope of log y against log x.
double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

}  // namespace

HypothesisReport hypothesis_check(const NonlinearitySpec& sigma, const std::vector<double>& probe_grid) {
  require(sigma.dim == 1, "hypothesis_check: needs m = 1");
  require(probe_grid.size() >= 3, "hypothesis_check: need at least three probe points");
  std::vector<double> x = probe_grid;
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  std::vector<double> s(n);
  double smax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::abs(sigma.scalar(x[i]));
    smax = std::max(smax, s[i]);
  }
  const double tol = 1e-12 * (1.0 + smax);
  HypothesisReport r;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<std::pair<std::size_t, std::size_t>> comps;
  for (std::size_t i = 0; i < n;) {
    if (s[i] <= tol) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && s[j + 1] > tol) ++j;
    comps.emplace_back(i, j);
    i = j + 1;
  }
  if (comps.empty()) {
    r.interval_class = "empty";
    r.certificate = true;
    r.certified_horizon = inf;
    r.note = "sigma vanishes on the probe grid; J is identically zero";
    return r;
  }
  if (comps.size() > 1) {
    std::ostringstream os;
    os << "hypothesis_check: positivity set is disconnected: (" << x[comps[0].first] << ", " << x[comps[0].second]
       << ") and (" << x[comps[1].first] << ", " << x[comps[1].second] << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  const auto [lo, hi] = comps.front();
  const bool lower_finite = lo > 0;
  const bool upper_finite = hi + 1 < n;
  r.lower = lower_finite ? x[lo - 1] : -inf;
  r.upper = upper_finite ? x[hi + 1] : inf;

  std::vector<double> px, ps;
  for (std::size_t i = lo; i <= hi; ++i) {
    px.push_back(x[i]);
    ps.push_back(s[i]);
  }

  if (lower_finite && upper_finite) {
    r.interval_class = "bounded";
    double beta = 0.0, kinv = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double d = std::min(px[i] - r.lower, r.upper - px[i]);
      beta = std::max(beta, ps[i] / d);
      kinv = std::max(kinv, d / ps[i]);
    }
    r.beta = beta;
    r.K = kinv;
    r.gamma = std::numeric_limits<double>::quiet_NaN();
  } else if (lower_finite || upper_finite) {
    r.interval_class = "half-line";
    const double a = lower_finite ? r.lower : r.upper;
    std::vector<double> tx, ts;
    double beta = 0.0, kmin = inf;
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double d = std::abs(px[i] - a);
      beta = std::max(beta, ps[i] / d);
      kmin = std::min(kmin, ps[i] / d);
      if (d >= 1.0) {
        tx.push_back(d);
        ts.push_back(ps[i]);
      }
    }
    double slope = log_slope(tx, ts);
    r.gamma = std::isnan(slope) ? 2.0 : 2.0 * slope;
    r.beta = beta;
    r.linear_k = kmin;
    const double g = std::min(r.gamma, 2.0);
    double K = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double d = std::abs(px[i] - a);
      const double lower = std::min(d, std::pow(d, 0.5 * g));
      K = std::max({K, lower / ps[i], ps[i] / std::pow(d, 0.5 * g)});
    }
    r.K = K;
  } else {
    r.interval_class = "real-line";
    std::vector<double> jx(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) jx[i] = japanese(px[i]);
    const double slope = log_slope(jx, ps);
    r.gamma = 2.0 * slope;
    const double g = std::min(r.gamma, 2.0);
    // Tail secant slopes of sigma^2 against x^2 at both ends of the grid.
    const std::size_t m = px.size();
    auto secant = [&](std::size_t i, std::size_t j) {
      return (ps[i] * ps[i] - ps[j] * ps[j]) / (px[i] * px[i] - px[j] * px[j]);
    };
    const double b2 = std::max({0.0, secant(0, 1), secant(m - 1, m - 2)});
    r.beta = std::sqrt(b2);
    double K = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = std::pow(jx[i], 0.5 * g);
      K = std::max({K, ps[i] * ps[i] - b2 * px[i] * px[i], ps[i] / w, w / ps[i]});
    }
    r.K = K;
  }

  if (r.interval_class != "bounded" && r.gamma > 2.1) {
    r.certificate = false;
    r.certified_horizon = 0.0;
    r.note = "growth exponent above 2: no finite constants fit";
    return r;
  }
  r.certificate = std::isfinite(r.K);
  r.certified_horizon = r.beta > 0.0 ? 1.0 / (r.beta * r.beta) : inf;
  return r;
}

}  // namespace decoupler
