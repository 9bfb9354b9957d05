#include "nonlinearity.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace decoupler {

namespace {

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

double param_required(const std::map<std::string, double>& p, const std::string& key, const std::string& family) {
  auto it = p.find(key);
  if (it == p.end()) fail(ErrorKind::Config, "nonlinearity '" + family + "' needs parameter '" + key + "'");
  return it->second;
}

template <class F>
NonlinearitySpec scalar_spec(F f) {
  NonlinearitySpec s;
  s.dim = 1;
  s.eval_scalar = f;
  s.eval_batch = [f](const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(b[i]);
  };
  s.eval = [f](const Vec& b) { return Mat::Constant(1, 1, f(b(0))); };
  return s;
}

}  // namespace

double NonlinearitySpec::scalar(double b) const {
  if (eval_scalar) return eval_scalar(b);
  Vec v(1);
  v(0) = b;
  return eval(v)(0, 0);
}

NonlinearitySpec make_nonlinearity(const std::string& family, const std::map<std::string, double>& params) {
  NonlinearitySpec s;
  if (family == "constant") {
    const double c = std::abs(param(params, "c", 1.0));
    s = scalar_spec([c](double) { return c; });
    s.lipschitz = 0.0;
    s.growth_m = c * c;
    s.growth_beta = 0.0;
  } else if (family == "linear") {
    const double beta = std::abs(param_required(params, "beta", family));
    s = scalar_spec([beta](double b) { return beta * std::abs(b); });
    s.lipschitz = beta;
    s.growth_beta = beta;
  } else if (family == "add_mult") {
    const double alpha = param(params, "alpha", 1.0);
    const double beta = std::abs(param_required(params, "beta", family));
    const double a2 = alpha * alpha;
    s = scalar_spec([beta, a2](double b) { return beta * std::sqrt(a2 + b * b); });
    s.lipschitz = beta;
    s.growth_m = beta * beta * a2;
    s.growth_beta = beta;
  } else if (family == "positive_part") {
    const double beta = std::abs(param_required(params, "beta", family));
    s = scalar_spec([beta](double b) { return beta * std::max(b, 0.0); });
    s.lipschitz = beta;
    s.growth_beta = beta;
  } else if (family == "fisher_wright") {
    const double alpha = std::abs(param(params, "alpha", 1.0));
    s = scalar_spec([alpha](double b) { return alpha * std::sqrt(std::abs(b * (1.0 - b))); });
    s.growth_m = 0.5 * alpha * alpha;
    s.growth_beta = alpha * std::sqrt(1.5);
  } else if (family == "fisher_wright_clipped") {
    const double alpha = std::abs(param(params, "alpha", 1.0));
    s = scalar_spec([alpha](double b) { return alpha * std::sqrt(std::max(0.0, b * (1.0 - b))); });
    s.growth_m = 0.25 * alpha * alpha;
    s.growth_beta = 0.0;
  } else if (family == "feller") {
    s = scalar_spec([](double b) { return std::sqrt(std::abs(b)); });
    s.growth_m = 0.5;
    s.growth_beta = std::sqrt(0.5);
  } else {
    fail(ErrorKind::Config, "unknown nonlinearity family '" + family + "'");
  }
  s.family = family;
  s.params = params;
  return s;
}

NonlinearitySpec make_constant_matrix(const Mat& c) {
  check_psd(c);
  NonlinearitySpec s;
  s.dim = int(c.rows());
  s.eval = [c](const Vec&) { return c; };
  if (s.dim == 1) {
    const double v = c(0, 0);
    s.eval_scalar = [v](double) { return v; };
  }
  s.lipschitz = 0.0;
  s.growth_m = c.squaredNorm();
  s.family = "constant";
  return s;
}

NonlinearitySpec make_tabulated(double b0, double db, std::vector<double> values) {
  require(values.size() >= 2 && db > 0.0, "make_tabulated: need at least two nodes and db > 0");
  const std::size_t n = values.size();
  double lip = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) lip = std::max(lip, std::abs(values[i + 1] - values[i]) / db);
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  auto f = [b0, db, n, vals = std::move(values)](double b) {
    const double x = (b - b0) / db;
    std::size_t i;
    if (x <= 0.0)
      i = 0;
    else if (x >= double(n - 1))
      i = n - 2;
    else
      i = std::min(n - 2, std::size_t(x));
    const double t = x - double(i);
    return std::max(0.0, vals[i] + t * (vals[i + 1] - vals[i]));
  };
  NonlinearitySpec s = scalar_spec(f);
  s.lipschitz = lip;
  const double bmax = std::max(std::abs(b0), std::abs(b0 + db * double(n - 1)));
  s.growth_beta = lip;
  s.growth_m = std::pow(vmax + lip * bmax, 2) * 2.0;
  s.family = "tabulated";
  return s;
}

MembershipReport check_membership(const NonlinearitySpec& s, const std::vector<Vec>& points, double eps_grid) {
  MembershipReport r;
  r.worst_growth_excess = -std::numeric_limits<double>::infinity();
  std::vector<Mat> vals;
  vals.reserve(points.size());
  for (const auto& b : points) {
    Mat v = s.eval(b);
    const double excess = v.squaredNorm() - s.growth_m - s.growth_beta * s.growth_beta * b.squaredNorm();
    r.worst_growth_excess = std::max(r.worst_growth_excess, excess);
    vals.push_back(std::move(v));
  }
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double d = (points[i + 1] - points[i]).norm();
    if (d > 0.0) r.lipschitz_estimate = std::max(r.lipschitz_estimate, (vals[i + 1] - vals[i]).norm() / d);
  }
  r.in_sigma_class = r.worst_growth_excess <= 1e-12 * (1.0 + s.growth_m);
  r.in_lambda_class = r.lipschitz_estimate <= s.lipschitz * (1.0 + eps_grid);
  return r;
}

double Diffusivity::eval_scalar(double q, double b) const {
  Vec v(1);
  v(0) = b;
  return eval(q, v)(0, 0);
}

ConstantDiffusivity::ConstantDiffusivity(Mat c, double horizon) : c_(std::move(c)), horizon_(horizon) {
  check_psd(c_);
}

FunctionDiffusivity::FunctionDiffusivity(int dim, double horizon, std::function<Mat(double, const Vec&)> f,
                                         std::function<double(double, double)> scalar, double lipschitz)
    : dim_(dim), horizon_(horizon), f_(std::move(f)), scalar_(std::move(scalar)), lip_(lipschitz) {}

double FunctionDiffusivity::eval_scalar(double q, double b) const {
  if (scalar_) return scalar_(q, b);
  return Diffusivity::eval_scalar(q, b);
}

std::shared_ptr<Diffusivity> diffusivity_from(const NonlinearitySpec& s, double horizon) {
  auto sc = s.eval_scalar;
  std::function<double(double, double)> scalar;
  if (sc) scalar = [sc](double, double b) { return sc(b); };
  auto ev = s.eval;
  return std::make_shared<FunctionDiffusivity>(
      s.dim, horizon, [ev](double, const Vec& b) { return ev(b); }, scalar, s.lipschitz);
}

}  // namespace decoupler
