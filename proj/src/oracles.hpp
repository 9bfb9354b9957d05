#pragma once

#include <map>
#include <memory>
#include <string>

#include "decoupling_field.hpp"
#include "nonlinearity.hpp"

namespace decoupler {

/// Closed-form root decoupling functions.
///
/// Scalar families (params in `scalars`): linear{beta}, add_mult{alpha, beta},
/// positive_part{beta}, fisher_wright{alpha}, fisher_wright_clipped{alpha}, feller,
/// constant{c}. The matrix family affine_quadratic takes
/// sigma^2(b) = g2(b b^T) + g1(b) + g0 with g2 an m^2 x m^2 matrix acting on
/// column-major vec, g1 an m^2 x m matrix and g0 an m x m symmetric matrix, and returns
/// J = [(Id - q g2)^{-1}(sigma^2(b))]^{1/2}.
struct OracleSpec {
  std::string family;
  std::map<std::string, double> scalars;
  Mat g2, g1, g0;

  int dim() const;
  /// Supremum of valid q (may be +inf).
  double blowup() const;
};

Mat oracle_J(const OracleSpec& spec, double q, const Vec& b);
double oracle_J(const OracleSpec& spec, double q, double b);

/// H = J^2 for scalar families.
double oracle_H(const OracleSpec& spec, double q, double b);

/// Oracle for a named scalar nonlinearity (family and params copied from it).
OracleSpec oracle_for(const NonlinearitySpec& s);

/// Scalar quadratic-family oracle spec for sigma^2 = g2 b^2 + g1 b + g0.
OracleSpec affine_quadratic_scalar(double g2, double g1, double g0);

std::shared_ptr<Diffusivity> oracle_diffusivity(const OracleSpec& spec, double horizon);

/// Field sampled from the oracle on a uniform grid.
DecouplingField oracle_field(const OracleSpec& spec, double Q0, double dq, double B, double db);

}  // namespace decoupler
