#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nonlinearity.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace decoupler {

/// Attenuated stochastic heat equation on the n x n torus of side L, held in
/// spectral form, one r2c array per component.
class SpdeState {
 public:
  /// `v0` is component-major: component c occupies [c n^2, (c+1) n^2).
  SpdeState(const SpectralGrid& grid, double rho, double dt, int m, const std::vector<double>& v0);
  static SpdeState constant(const SpectralGrid& grid, double rho, double dt, const Vec& a);

  const SpectralGrid& grid() const { return *grid_; }
  double rho() const { return rho_; }
  double dt() const { return dt_; }
  double t() const { return t_; }
  long steps() const { return steps_; }
  int m() const { return m_; }
  std::complex<double>* spectrum(int c) { return spec_[c].data(); }
  const std::complex<double>* spectrum(int c) const { return spec_[c].data(); }
  /// Real-space values of component c.
  std::vector<double> field(int c = 0) const;
  void field_into(int c, double* out) const;

 private:
  friend void spde_step(SpdeState&, const NonlinearitySpec&, const double*);
  friend void spde_advance_constant(SpdeState&, const Mat&, int, Stream&);
  const SpectralGrid* grid_;
  double rho_, dt_, t_ = 0.0;
  long steps_ = 0;
  int m_;
  std::vector<ComplexBuffer> spec_;
  std::vector<double> decay_, inject_;
};

/// One exponential-Euler step v <- G_dt v + gamma G_{rho+dt/2}[sigma(v) dW].
/// `dW` holds n^2 m values with variance dt/h^2, component-major.
void spde_step(SpdeState& s, const NonlinearitySpec& sigma, const double* dW);
/// Same, drawing dW from `rng`.
void spde_step(SpdeState& s, const NonlinearitySpec& sigma, Stream& rng);

/// K steps of the scheme with constant sigma = c in one draw. The stepped
/// recursion is linear with Gaussian innovations, so summing the K innovations
/// mode by mode gives a single Gaussian with the same law as K separate steps.
void spde_advance_constant(SpdeState& s, const Mat& c, int K, Stream& rng);

/// Pointwise variance of the scheme after K steps with constant scalar sigma = c,
/// from the exact mode sum.
double scheme_constant_variance(const SpectralGrid& g, double rho, double dt, long K, double c);

/// Largest admissible lattice spacing and time step for smoothing parameter rho.
double max_spacing(double rho);
double max_dt(double rho);

struct BoxAverage {
  std::vector<double> field;
  int cells = 1;          ///< side of each square in lattice cells
  double zeta = 0.0;      ///< snapped side length
  int offset_x = 0, offset_y = 0;  ///< snapped offset in cells
};

/// Block means over the squares of side zeta offset by (zx, zy), on the torus.
/// zeta snaps to the nearest multiple of h that divides the period.
BoxAverage box_average(const SpectralGrid& g, const std::vector<double>& field, double zeta, double zx = 0.0,
                       double zy = 0.0);

/// Recorded snapshots of one scalar run, for martingale observables.
struct SpdeHistory {
  const SpectralGrid* grid = nullptr;
  std::vector<double> times;
  std::vector<ComplexBuffer> spectra;
  void record(const SpdeState& s);
};

struct MartingalePath {
  std::vector<double> times;
  std::vector<double> values;        ///< G_{T-t} v_t(x)
  std::vector<double> qv_increments;  ///< realized squared increments
  std::vector<double> qv_expected;    ///< predicted increments from the quadratic-variation integrand
};

/// V_t = G_{T-t} v_t(x) at lattice node (ix, iy) over a recorded history. The
/// predicted increment over [t_k, t_{k+1}] freezes sigma^2(v) at t_k and integrates
/// the 1/(T+rho-r) weight exactly.
MartingalePath martingale_v(const SpdeHistory& hist, const NonlinearitySpec& sigma, double rho, double T, int ix,
                            int iy);

/// Field snapshot container "SPD1".
void write_spd1(const std::string& path, const SpdeState& s);
struct Spd1 {
  int n = 0, m = 0;
  double L = 0.0, t = 0.0, rho = 0.0;
  std::vector<double> values;
};
Spd1 read_spd1(const std::string& path);

}  // namespace decoupler
