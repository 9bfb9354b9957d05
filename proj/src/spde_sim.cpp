#include "spde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "errors.hpp"
#include "scales.hpp"

namespace decoupler {

namespace {

constexpr double kSlack = 1.0 + 1e-12;

RealBuffer& scratch_real(int which, std::size_t n) {
  thread_local RealBuffer bufs[4];
  if (bufs[which].size() < n) bufs[which] = RealBuffer(n);
  return bufs[which];
}

ComplexBuffer& scratch_spec(int which, std::size_t n) {
  thread_local ComplexBuffer bufs[3];
  if (bufs[which].size() < n) bufs[which] = ComplexBuffer(n);
  return bufs[which];
}

double mode_weight(const SpectralGrid& g, int j) { return (j == 0 || j == g.n() / 2) ? 1.0 : 2.0; }

}  // namespace

double max_spacing(double rho) { return std::sqrt(rho / 4.0); }
double max_dt(double rho) { return rho / 4.0; }

SpdeState::SpdeState(const SpectralGrid& grid, double rho, double dt, int m, const std::vector<double>& v0)
    : grid_(&grid), rho_(rho), dt_(dt), m_(m) {
  require(rho > 0.0 && rho < 1.0, "SpdeState: rho must lie in (0, 1)");
  require(dt > 0.0, "SpdeState: dt must be positive");
  require(m >= 1, "SpdeState: m must be >= 1");
  const double h = grid.h();
  if (h * h > rho / 4.0 * kSlack)
    fail(ErrorKind::InvalidArgument, "SpdeState: h^2 = " + std::to_string(h * h) + " exceeds rho/4");
  if (dt > rho / 4.0 * kSlack)
    fail(ErrorKind::InvalidArgument, "SpdeState: dt = " + std::to_string(dt) + " exceeds rho/4");
  const std::size_t n2 = grid.real_size();
  require(v0.size() == n2 * std::size_t(m), "SpdeState: initial field has the wrong size");
  const auto& k2 = grid.k2();
  const double gam = scales::gamma_rho(rho);
  decay_.resize(k2.size());
  inject_.resize(k2.size());
  for (std::size_t k = 0; k < k2.size(); ++k) {
    decay_[k] = std::exp(-0.5 * dt * k2[k]);
    inject_[k] = gam * std::exp(-0.5 * (rho + 0.5 * dt) * k2[k]);
  }
  RealBuffer in(n2);
  for (int c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n2; ++i) {
      const double x = v0[c * n2 + i];
      if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "SpdeState: non-finite initial value");
      in[i] = x;
    }
    spec_.emplace_back(grid.spec_size());
    grid.forward(in.data(), spec_.back().data());
  }
}

SpdeState SpdeState::constant(const SpectralGrid& grid, double rho, double dt, const Vec& a) {
  const std::size_t n2 = grid.real_size();
  std::vector<double> v0(n2 * a.size());
  for (Eigen::Index c = 0; c < a.size(); ++c) std::fill(v0.begin() + c * n2, v0.begin() + (c + 1) * n2, a[c]);
  return SpdeState(grid, rho, dt, int(a.size()), v0);
}

std::vector<double> SpdeState::field(int c) const {
  std::vector<double> out(grid_->real_size());
  field_into(c, out.data());
  return out;
}

void SpdeState::field_into(int c, double* out) const {
  auto& buf = scratch_real(2, grid_->real_size());
  grid_->inverse(spec_.at(c).data(), buf.data());
  std::memcpy(out, buf.data(), grid_->real_size() * sizeof(double));
}

void spde_step(SpdeState& s, const NonlinearitySpec& sigma, const double* dW) {
  const SpectralGrid& g = *s.grid_;
  const std::size_t n2 = g.real_size(), ns = g.spec_size();
  const int m = s.m_;
  require(sigma.dim == m, "spde_step: nonlinearity dimension mismatch");
  auto& v = scratch_real(0, n2 * m);
  auto& prod = scratch_real(1, n2 * m);
  for (int c = 0; c < m; ++c) g.inverse(s.spec_[c].data(), v.data() + c * n2);
  auto non_finite = [&] {
    fail(ErrorKind::Numerical, "spde_step: non-finite field at step " + std::to_string(s.steps_));
  };

  if (m == 1 && sigma.eval_batch) {
    sigma.eval_batch(v.data(), prod.data(), n2);
    bool finite = true;
    for (std::size_t i = 0; i < n2; ++i) {
      finite &= std::isfinite(v[i]);
      prod[i] *= dW[i];
    }
    if (!finite) non_finite();
  } else {
    for (std::size_t i = 0; i < n2 * m; ++i)
      if (!std::isfinite(v[i])) non_finite();
    if (m == 1) {
      for (std::size_t i = 0; i < n2; ++i) prod[i] = sigma.scalar(v[i]) * dW[i];
    } else {
      Vec b(m);
      for (std::size_t i = 0; i < n2; ++i) {
        for (int c = 0; c < m; ++c) b[c] = v[c * n2 + i];
        const Mat S = sigma.eval(b);
        for (int c = 0; c < m; ++c) {
          double acc = 0.0;
          for (int d = 0; d < m; ++d) acc += S(c, d) * dW[d * n2 + i];
          prod[c * n2 + i] = acc;
        }
      }
    }
  }

  auto& P = scratch_spec(0, ns);
  for (int c = 0; c < m; ++c) {
    g.forward(prod.data() + c * n2, P.data());
    std::complex<double>* vh = s.spec_[c].data();
    for (std::size_t k = 0; k < ns; ++k) vh[k] = s.decay_[k] * vh[k] + s.inject_[k] * P[k];
  }
  s.t_ += s.dt_;
  ++s.steps_;
}

void spde_step(SpdeState& s, const NonlinearitySpec& sigma, Stream& rng) {
  const std::size_t n = s.grid().real_size() * s.m();
  auto& noise = scratch_real(3, n);
  rng.fill_normal(noise.data(), n, std::sqrt(s.dt()) / s.grid().h());
  spde_step(s, sigma, noise.data());
}

void spde_advance_constant(SpdeState& s, const Mat& c, int K, Stream& rng) {
  require(K >= 0, "spde_advance_constant: K must be >= 0");
  require(c.rows() == s.m_ && c.cols() == s.m_, "spde_advance_constant: matrix dimension mismatch");
  if (K == 0) return;
  const SpectralGrid& g = *s.grid_;
  const std::size_t n2 = g.real_size(), ns = g.spec_size();
  const int m = s.m_;
  const auto& k2 = g.k2();
  const double gam = scales::gamma_rho(s.rho_);
  const double smooth = s.rho_ + 0.5 * s.dt_;
  const double dt = s.dt_;

  auto& noise = scratch_real(0, n2);
  std::vector<ComplexBuffer> W;
  for (int d = 0; d < m; ++d) {
    rng.fill_normal(noise.data(), n2, std::sqrt(dt) / g.h());
    W.emplace_back(ns);
    g.forward(noise.data(), W.back().data());
  }
  for (std::size_t k = 0; k < ns; ++k) {
    const double x = dt * k2[k];
    const double agg = k2[k] == 0.0 ? std::sqrt(double(K)) : std::sqrt(std::expm1(-K * x) / std::expm1(-x));
    const double inj = gam * std::exp(-0.5 * smooth * k2[k]) * agg;
    const double decay = std::exp(-0.5 * K * x);
    for (int a = 0; a < m; ++a) {
      std::complex<double> acc = 0.0;
      for (int d = 0; d < m; ++d) acc += c(a, d) * W[d][k];
      s.spec_[a][k] = decay * s.spec_[a][k] + inj * acc;
    }
  }
  s.t_ += K * dt;
  s.steps_ += K;
}

double scheme_constant_variance(const SpectralGrid& g, double rho, double dt, long K, double c) {
  const auto& k2 = g.k2();
  const double gam = scales::gamma_rho(rho);
  double acc = 0.0;
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.nh(); ++j) {
      const double kk = k2[std::size_t(i) * g.nh() + j];
      const double x = dt * kk;
      const double geo = kk == 0.0 ? double(K) : std::expm1(-K * x) / std::expm1(-x);
      acc += mode_weight(g, j) * std::exp(-(rho + 0.5 * dt) * kk) * geo;
    }
  return gam * gam * c * c * dt / (g.L() * g.L()) * acc;
}

BoxAverage box_average(const SpectralGrid& g, const std::vector<double>& field, double zeta, double zx, double zy) {
  const int n = g.n();
  const double h = g.h();
  require(field.size() == g.real_size(), "box_average: field size mismatch");
  if (!(zeta >= h * (1.0 - 1e-9))) fail(ErrorKind::InvalidArgument, "box_average: zeta below the lattice spacing");
  const double want = zeta / h;
  int cells = 1;
  for (int d = 1; d <= n; ++d)
    if (n % d == 0 && std::abs(d - want) < std::abs(cells - want)) cells = d;
  auto wrap = [&](long v, long p) { return int(((v % p) + p) % p); };
  BoxAverage out;
  out.cells = cells;
  out.zeta = cells * h;
  out.offset_x = wrap(std::lround(zx / h), cells);
  out.offset_y = wrap(std::lround(zy / h), cells);
  const int nb = n / cells;
  std::vector<double> sums(std::size_t(nb) * nb, 0.0);
  for (int i = 0; i < n; ++i) {
    const int bi = wrap(i - out.offset_x, n) / cells;
    for (int j = 0; j < n; ++j) sums[std::size_t(bi) * nb + wrap(j - out.offset_y, n) / cells] += field[std::size_t(i) * n + j];
  }
  const double inv = 1.0 / (double(cells) * cells);
  out.field.resize(field.size());
  for (int i = 0; i < n; ++i) {
    const int bi = wrap(i - out.offset_x, n) / cells;
    for (int j = 0; j < n; ++j)
      out.field[std::size_t(i) * n + j] = sums[std::size_t(bi) * nb + wrap(j - out.offset_y, n) / cells] * inv;
  }
  return out;
}

void SpdeHistory::record(const SpdeState& s) {
  require(s.m() == 1, "SpdeHistory: scalar runs only");
  require(grid == nullptr || grid == &s.grid(), "SpdeHistory: grid changed between records");
  grid = &s.grid();
  times.push_back(s.t());
  spectra.emplace_back(s.grid().spec_size());
  std::memcpy(static_cast<void*>(spectra.back().data()), s.spectrum(0),
              s.grid().spec_size() * sizeof(std::complex<double>));
}

MartingalePath martingale_v(const SpdeHistory& hist, const NonlinearitySpec& sigma, double rho, double T, int ix,
                            int iy) {
  require(!hist.times.empty(), "martingale_v: empty history");
  require(sigma.dim == 1, "martingale_v: scalar nonlinearity required");
  require(hist.grid != nullptr, "martingale_v: history has no grid");
  MartingalePath out;
  out.times = hist.times;
  const std::size_t K = hist.times.size();
  // Step times accumulate dt, so the last one may overshoot T by rounding.
  const double slack = 1e-12 * std::max(1.0, T);
  for (double t : hist.times) require(T >= t - slack, "martingale_v: T precedes a recorded time");
  out.values.resize(K);
  out.qv_increments.resize(K - 1);
  out.qv_expected.resize(K - 1);
  const double L = scales::log_scale(1.0 / rho);
  for (std::size_t k = 0; k < K; ++k) out.values[k] = heat_point(*hist.grid, hist.spectra[k].data(), std::max(0.0, T - hist.times[k]), ix, iy);
  const std::size_t n2 = hist.grid->real_size();
  RealBuffer v(n2), s2(n2);
  ComplexBuffer s2h(hist.grid->spec_size());
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double dv = out.values[k + 1] - out.values[k];
    out.qv_increments[k] = dv * dv;
    hist.grid->inverse(hist.spectra[k].data(), v.data());
    for (std::size_t i = 0; i < n2; ++i) {
      const double sv = sigma.scalar(v[i]);
      s2[i] = sv * sv;
    }
    hist.grid->forward(s2.data(), s2h.data());
    const double tk = hist.times[k], tk1 = hist.times[k + 1];
    const double smoothed = heat_point(*hist.grid, s2h.data(), 0.5 * (T + rho - tk), ix, iy);
    out.qv_expected[k] = smoothed * std::log((T + rho - tk) / (T + rho - tk1)) / L;
  }
  return out;
}

void write_spd1(const std::string& path, const SpdeState& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path);
  os.write("SPD1", 4);
  const std::uint32_t n = std::uint32_t(s.grid().n()), m = std::uint32_t(s.m());
  const double hdr[3] = {s.grid().L(), s.t(), s.rho()};
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&m), 4);
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  for (int c = 0; c < s.m(); ++c) {
    const auto f = s.field(c);
    os.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size() * sizeof(double)));
  }
  if (!os) fail(ErrorKind::Io, "write failed: " + path);
}

Spd1 read_spd1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SPD1", 4) != 0) fail(ErrorKind::Io, path + ": not an SPD1 file");
  std::uint32_t n = 0, m = 0;
  double hdr[3];
  is.read(reinterpret_cast<char*>(&n), 4);
  is.read(reinterpret_cast<char*>(&m), 4);
  is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (!is) fail(ErrorKind::Io, "truncated SPD1 file");
  Spd1 out;
  out.n = int(n);
  out.m = int(m);
  out.L = hdr[0];
  out.t = hdr[1];
  out.rho = hdr[2];
  out.values.resize(std::size_t(n) * n * m);
  is.read(reinterpret_cast<char*>(out.values.data()), std::streamsize(out.values.size() * sizeof(double)));
  if (!is) fail(ErrorKind::Io, "truncated SPD1 file");
  return out;
}

}  // namespace decoupler
