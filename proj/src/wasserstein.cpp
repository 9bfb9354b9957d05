#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "rng.hpp"
#include "sde_engine.hpp"

namespace decoupler {

double w2_sq_presorted(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < na && j < nb) {
    const double next_a = double(i + 1) / double(na);
    const double next_b = double(j + 1) / double(nb);
    const double next = std::min(next_a, next_b);
    const double d = a[i] - b[j];
    acc += (next - u) * d * d;
    u = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return acc;
}

namespace {

double w2_sq_sorted(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return w2_sq_presorted(a, b);
}

// Minimum-cost perfect matching (Hungarian method with potentials), O(n^3).
double assignment_cost(const std::vector<double>& a, const std::vector<double>& b, std::size_t n, int m) {
  auto cost = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) {
      const double d = a[i * m + c] - b[j * m + c];
      s += d * d;
    }
    return s;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
  return total;
}

}  // namespace

W2Result wasserstein2(const std::vector<double>& a, const std::vector<double>& b, int m, std::uint64_t seed,
                      int directions) {
  require(m >= 1, "wasserstein2: dimension must be positive");
  require(!a.empty() && !b.empty(), "wasserstein2: empty sample set");
  require(a.size() % m == 0 && b.size() % m == 0, "wasserstein2: sample size not a multiple of m");
  W2Result r;
  if (m == 1) {
    r.method = "sorted";
    r.value = std::sqrt(std::max(0.0, w2_sq_sorted(a, b)));
    return r;
  }
  const std::size_t n = a.size() / m;
  require(b.size() / m == n, "wasserstein2: m > 1 needs equal sample counts");
  if (n <= 1024) {
    r.method = "assignment";
    r.value = std::sqrt(std::max(0.0, assignment_cost(a, b, n, m) / double(n)));
    return r;
  }
  r.method = "sliced";
  r.directions = std::max(64, directions);
  Stream st(seed, Domain::Sliced, 0);
  std::vector<double> dir(m), pa(n), pb(n);
  double acc = 0.0;
  for (int d = 0; d < r.directions; ++d) {
    double norm = 0.0;
    for (int c = 0; c < m; ++c) {
      dir[c] = st.normal();
      norm += dir[c] * dir[c];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) {
      double sa = 0.0, sb = 0.0;
      for (int c = 0; c < m; ++c) {
        sa += a[i * m + c] * dir[c] / norm;
        sb += b[i * m + c] * dir[c] / norm;
      }
      pa[i] = sa;
      pb[i] = sb;
    }
    acc += w2_sq_sorted(pa, pb);
  }
  r.value = std::sqrt(acc / r.directions);
  return r;
}

}  // namespace decoupler
