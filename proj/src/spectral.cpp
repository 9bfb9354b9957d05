#include "spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <new>

#include "errors.hpp"

namespace decoupler {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

template <class T>
AlignedBuffer<T>::AlignedBuffer(std::size_t n) : n_(n) {
  if (n) {
    p_ = static_cast<T*>(fftw_malloc(n * sizeof(T)));
    if (!p_) throw std::bad_alloc();
    std::memset(static_cast<void*>(p_), 0, n * sizeof(T));
  }
}

template <class T>
AlignedBuffer<T>::AlignedBuffer(const AlignedBuffer& o) : AlignedBuffer(o.n_) {
  if (n_) std::memcpy(static_cast<void*>(p_), o.p_, n_ * sizeof(T));
}

template <class T>
AlignedBuffer<T>& AlignedBuffer<T>::operator=(const AlignedBuffer& o) {
  if (this != &o) {
    AlignedBuffer tmp(o);
    *this = std::move(tmp);
  }
  return *this;
}

template <class T>
AlignedBuffer<T>::AlignedBuffer(AlignedBuffer&& o) noexcept : p_(o.p_), n_(o.n_) {
  o.p_ = nullptr;
  o.n_ = 0;
}

template <class T>
AlignedBuffer<T>& AlignedBuffer<T>::operator=(AlignedBuffer&& o) noexcept {
  if (this != &o) {
    if (p_) fftw_free(p_);
    p_ = o.p_;
    n_ = o.n_;
    o.p_ = nullptr;
    o.n_ = 0;
  }
  return *this;
}

template <class T>
AlignedBuffer<T>::~AlignedBuffer() {
  if (p_) fftw_free(p_);
}

template <class T>
void AlignedBuffer<T>::fill(const T& v) {
  std::fill(p_, p_ + n_, v);
}

template class AlignedBuffer<double>;
template class AlignedBuffer<std::complex<double>>;

SpectralGrid::SpectralGrid(int n, double L) : n_(n), nh_(n / 2 + 1), L_(L) {
  require(n >= 4 && n % 2 == 0, "SpectralGrid: n must be even and >= 4");
  require(L > 0.0, "SpectralGrid: L must be positive");
  k2_.resize(spec_size());
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < nh_; ++j) k2_[std::size_t(i) * nh_ + j] = kx(i) * kx(i) + ky(j) * ky(j);
  RealBuffer r(real_size());
  ComplexBuffer c(spec_size());
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_f_ = fftw_plan_dft_r2c_2d(n_, n_, r.data(), reinterpret_cast<fftw_complex*>(c.data()), FFTW_ESTIMATE);
  plan_b_ = fftw_plan_dft_c2r_2d(n_, n_, reinterpret_cast<fftw_complex*>(c.data()), r.data(), FFTW_ESTIMATE);
  if (!plan_f_ || !plan_b_) fail(ErrorKind::Numerical, "SpectralGrid: FFTW planning failed");
}

SpectralGrid::~SpectralGrid() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plan_f_) fftw_destroy_plan(static_cast<fftw_plan>(plan_f_));
  if (plan_b_) fftw_destroy_plan(static_cast<fftw_plan>(plan_b_));
}

double SpectralGrid::kx(int i) const {
  const int f = i <= n_ / 2 ? i : i - n_;
  return 2.0 * std::numbers::pi * f / L_;
}

double SpectralGrid::ky(int j) const { return 2.0 * std::numbers::pi * j / L_; }

void SpectralGrid::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_f_), const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void SpectralGrid::inverse(const std::complex<double>* in, double* out) const {
  // c2r overwrites its input, so transform a per-thread copy.
  thread_local ComplexBuffer scratch;
  if (scratch.size() < spec_size()) scratch = ComplexBuffer(spec_size());
  std::memcpy(static_cast<void*>(scratch.data()), in, spec_size() * sizeof(std::complex<double>));
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_b_), reinterpret_cast<fftw_complex*>(scratch.data()), out);
  const double s = 1.0 / double(real_size());
  for (std::size_t i = 0; i < real_size(); ++i) out[i] *= s;
}

std::vector<double> heat_apply(const SpectralGrid& g, const std::vector<double>& field, double tau) {
  require(tau >= 0.0, "heat_apply: tau must be >= 0");
  require(field.size() == g.real_size(), "heat_apply: field size mismatch");
  if (tau == 0.0) return field;
  RealBuffer in(g.real_size()), out(g.real_size());
  std::copy(field.begin(), field.end(), in.data());
  ComplexBuffer f(g.spec_size());
  g.forward(in.data(), f.data());
  const auto& k2 = g.k2();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] *= std::exp(-0.5 * tau * k2[i]);
  g.inverse(f.data(), out.data());
  return std::vector<double>(out.data(), out.data() + g.real_size());
}

double heat_point(const SpectralGrid& g, const std::complex<double>* fhat, double tau, int ix, int iy) {
  const int n = g.n(), nh = g.nh();
  const auto& k2 = g.k2();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double px = 2.0 * std::numbers::pi * double((std::size_t(i) * ix) % n) / n;
    for (int j = 0; j < nh; ++j) {
      const std::size_t t = std::size_t(i) * nh + j;
      const double phase = px + 2.0 * std::numbers::pi * double((std::size_t(j) * iy) % n) / n;
      const double w = (j == 0 || (n % 2 == 0 && j == n / 2)) ? 1.0 : 2.0;
      const std::complex<double> e(std::cos(phase), std::sin(phase));
      acc += w * std::exp(-0.5 * tau * k2[t]) * (fhat[t] * e).real();
    }
  }
  return acc / double(g.real_size());
}

}  // namespace decoupler
