#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>

#include "psd_matrix.hpp"

namespace decoupler {

/// A map b in R^m -> nonnegative-definite symmetric m x m matrix, with its declared
/// Lipschitz constant and growth pair (M, beta).
struct NonlinearitySpec {
  int dim = 1;
  std::function<Mat(const Vec&)> eval;
  /// Scalar fast path for dim == 1; optional.
  std::function<double(double)> eval_scalar;
  /// Elementwise scalar evaluation over an array; optional.
  std::function<void(const double*, double*, std::size_t)> eval_batch;
  double lipschitz = std::numeric_limits<double>::infinity();
  double growth_m = 0.0;
  double growth_beta = 0.0;
  std::string family;  ///< closed-form tag, empty for tabulated or custom maps
  std::map<std::string, double> params;

  double scalar(double b) const;
  Mat operator()(const Vec& b) const { return eval(b); }
};

/// Named scalar families: constant(c), linear(beta), add_mult(alpha, beta),
/// positive_part(beta), fisher_wright(alpha), fisher_wright_clipped(alpha), feller.
NonlinearitySpec make_nonlinearity(const std::string& family, const std::map<std::string, double>& params);

/// Constant m x m matrix nonlinearity.
NonlinearitySpec make_constant_matrix(const Mat& c);

/// Piecewise-linear interpolant of tabulated values on a uniform grid, extended
/// linearly with the boundary slopes.
NonlinearitySpec make_tabulated(double b0, double db, std::vector<double> values);

struct MembershipReport {
  double worst_growth_excess = 0.0;  ///< max(|s|_F^2 - M - beta^2 |b|^2)
  double lipschitz_estimate = 0.0;
  bool in_sigma_class = true;
  bool in_lambda_class = true;
};

/// Spot-checks Sigma(M, beta) and Lambda(lambda) on a sampled set of points.
MembershipReport check_membership(const NonlinearitySpec& s, const std::vector<Vec>& points, double eps_grid = 0.05);

/// g(q, b): time-dependent diffusivity on [0, horizon] with values in psd matrices.
class Diffusivity {
 public:
  virtual ~Diffusivity() = default;
  virtual int dim() const = 0;
  virtual double horizon() const = 0;
  virtual Mat eval(double q, const Vec& b) const = 0;
  virtual double eval_scalar(double q, double b) const;
  /// Uniform-in-q Lipschitz bound in b (may be +inf when unknown).
  virtual double lipschitz_bound() const { return std::numeric_limits<double>::infinity(); }
};

class ConstantDiffusivity final : public Diffusivity {
 public:
  explicit ConstantDiffusivity(Mat c, double horizon = std::numeric_limits<double>::infinity());
  int dim() const override { return int(c_.rows()); }
  double horizon() const override { return horizon_; }
  Mat eval(double, const Vec&) const override { return c_; }
  double eval_scalar(double, double) const override { return c_(0, 0); }
  double lipschitz_bound() const override { return 0.0; }

 private:
  Mat c_;
  double horizon_;
};

/// Wraps arbitrary callables.
class FunctionDiffusivity final : public Diffusivity {
 public:
  FunctionDiffusivity(int dim, double horizon, std::function<Mat(double, const Vec&)> f,
                      std::function<double(double, double)> scalar = {},
                      double lipschitz = std::numeric_limits<double>::infinity());
  int dim() const override { return dim_; }
  double horizon() const override { return horizon_; }
  Mat eval(double q, const Vec& b) const override { return f_(q, b); }
  double eval_scalar(double q, double b) const override;
  double lipschitz_bound() const override { return lip_; }

 private:
  int dim_;
  double horizon_;
  std::function<Mat(double, const Vec&)> f_;
  std::function<double(double, double)> scalar_;
  double lip_;
};

/// The q-independent diffusivity g(q, b) = sigma(b).
std::shared_ptr<Diffusivity> diffusivity_from(const NonlinearitySpec& s,
                                              double horizon = std::numeric_limits<double>::infinity());

}  // namespace decoupler
