#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "nonlinearity.hpp"

namespace decoupler {

/// Scalar (m = 1) field on a uniform (q, b) grid: q_i = i dq for i < nq, b_j = b0 + j db.
/// Stores J (or H, see `quantity`) row-major by q. Piecewise-linear in q and b,
/// extended linearly in b beyond the grid.
struct DecouplingField {
  std::string quantity = "J";
  std::string provenance;  ///< picard | pde | oracle | rescale | extend
  int nq = 0;
  double dq = 0.0;
  int nb = 0;
  double b0 = 0.0;
  double db = 0.0;
  std::vector<double> values;
  std::vector<double> stderr_values;  ///< optional, same shape
  std::vector<double> lipschitz;      ///< per q row
  double qbar_lower = std::numeric_limits<double>::quiet_NaN();

  DecouplingField() = default;
  DecouplingField(int nq, double dq, int nb, double b0, double db);

  double horizon() const { return dq * (nq - 1); }
  double q(int i) const { return dq * i; }
  double b(int j) const { return b0 + db * j; }
  double b_max() const { return b(nb - 1); }
  double& at(int i, int j) { return values[std::size_t(i) * nb + j]; }
  double at(int i, int j) const { return values[std::size_t(i) * nb + j]; }
  double se(int i, int j) const { return stderr_values.empty() ? 0.0 : stderr_values[std::size_t(i) * nb + j]; }

  double eval(double q, double b) const;
  /// Row of values at arbitrary q (linear in q), one entry per b node.
  void row_at(double q, double* out) const;
  /// Max adjacent finite difference per q row.
  void compute_lipschitz();
  /// Largest stored standard error.
  double max_stderr() const;
};

/// Linear interpolation on a uniform row with linear extension, floored at zero.
inline double interp_row(const double* row, int nb, double b0, double inv_db, double b) {
  const double x = (b - b0) * inv_db;
  int i = int(x);
  if (x < 0.0) i = 0;
  if (i > nb - 2) i = nb - 2;
  const double v = row[i] + (x - double(i)) * (row[i + 1] - row[i]);
  return v > 0.0 ? v : 0.0;
}

/// X-norm weight <b> = sqrt(1 + b^2).
inline double japanese(double b) { return std::sqrt(1.0 + b * b); }

/// sup over grid nodes with |b| <= b_window of |F(q_i,b_j) - f(q_i,b_j)| / <b_j>.
double x_norm_error(const DecouplingField& F, const std::function<double(double, double)>& f,
                    double b_window = std::numeric_limits<double>::infinity());

/// Largest per-node standard error over nodes with |b| <= b_window, weighted by <b>.
double x_norm_stderr(const DecouplingField& F, double b_window = std::numeric_limits<double>::infinity());

/// g(q, b) = F(q, b) as a diffusivity (F must hold J).
class GridDiffusivity final : public Diffusivity {
 public:
  explicit GridDiffusivity(std::shared_ptr<const DecouplingField> f);
  int dim() const override { return 1; }
  double horizon() const override { return f_->horizon(); }
  Mat eval(double q, const Vec& b) const override { return Mat::Constant(1, 1, f_->eval(q, b(0))); }
  double eval_scalar(double q, double b) const override { return f_->eval(q, b); }
  double lipschitz_bound() const override;

 private:
  std::shared_ptr<const DecouplingField> f_;
};

/// Container: one line of JSON header, then values (and stderr if present) as
/// little-endian float64, row-major by q.
void save_field(const std::string& path, const DecouplingField& f);
DecouplingField load_field(const std::string& path);

}  // namespace decoupler
