#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace decoupler {

/// fftw_malloc-backed buffer (SIMD-aligned).
template <class T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n);
  AlignedBuffer(const AlignedBuffer& o);
  AlignedBuffer& operator=(const AlignedBuffer& o);
  AlignedBuffer(AlignedBuffer&& o) noexcept;
  AlignedBuffer& operator=(AlignedBuffer&& o) noexcept;
  ~AlignedBuffer();

  T* data() { return p_; }
  const T* data() const { return p_; }
  std::size_t size() const { return n_; }
  T& operator[](std::size_t i) { return p_[i]; }
  const T& operator[](std::size_t i) const { return p_[i]; }
  void fill(const T& v);

 private:
  T* p_ = nullptr;
  std::size_t n_ = 0;
};

using RealBuffer = AlignedBuffer<double>;
using ComplexBuffer = AlignedBuffer<std::complex<double>>;

/// Periodic n x n lattice of side L with r2c/c2r transforms and |k|^2 table.
/// Spectral arrays have n x (n/2 + 1) entries, row-major with kx along rows.
class SpectralGrid {
 public:
  SpectralGrid(int n, double L);
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  int n() const { return n_; }
  int nh() const { return nh_; }
  double L() const { return L_; }
  double h() const { return L_ / n_; }
  std::size_t real_size() const { return std::size_t(n_) * n_; }
  std::size_t spec_size() const { return std::size_t(n_) * nh_; }
  const std::vector<double>& k2() const { return k2_; }
  /// Wavenumber components of spectral index (i, j).
  double kx(int i) const;
  double ky(int j) const;

  /// Unnormalized forward transform. Both pointers must be fftw_malloc-aligned.
  void forward(const double* in, std::complex<double>* out) const;
  /// Inverse transform including the 1/n^2 factor. `in` is preserved.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  int n_, nh_;
  double L_;
  std::vector<double> k2_;
  void* plan_f_ = nullptr;
  void* plan_b_ = nullptr;
};

/// G_tau applied on the torus by the symbol exp(-tau |k|^2 / 2); tau = 0 returns the input.
std::vector<double> heat_apply(const SpectralGrid& g, const std::vector<double>& field, double tau);

/// G_tau f evaluated at lattice node (ix, iy) from spectral coefficients.
double heat_point(const SpectralGrid& g, const std::complex<double>* fhat, double tau, int ix, int iy);

}  // namespace decoupler
