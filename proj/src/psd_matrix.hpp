#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace decoupler {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Frobenius (Schatten-2), operator (Schatten-inf) and nuclear (Schatten-1) norms.
struct MatrixNorms {
  double frobenius = 0.0;
  double op = 0.0;
  double nuclear = 0.0;
};

MatrixNorms matrix_norms(const Mat& a);

bool is_symmetric(const Mat& a);

/// Throws ErrorKind::NotPsd unless `a` is symmetric with smallest eigenvalue
/// >= -1e-10 (1 + |a|_op).
void check_psd(const Mat& a);

/// Square root of a nonnegative-definite symmetric matrix. Eigenvalues in
/// [-1e-10 scale, 0) are clamped to zero; anything more negative is rejected.
Mat psd_sqrt(const Mat& a);

/// Scalar psd square root, same clamping rule as psd_sqrt.
double psd_sqrt(double a);

struct WeightedPair {
  Mat s1;
  Mat s2;
  double weight = 1.0;
};

struct ReverseTriangle {
  double lhs = 0.0;        ///< |(E s1^2)^{1/2} - (E s2^2)^{1/2}|_F
  double rhs = 0.0;        ///< (E |s1 - s2|_F^2)^{1/2}
  double violation = 0.0;  ///< max(0, lhs - rhs)
};

/// Evaluates the matrix-valued reverse triangle inequality for one weighted
/// distribution of pairs (weights are renormalized to sum to one).
ReverseTriangle check_reverse_triangle(const std::vector<WeightedPair>& dist);

struct ViolationReport {
  std::size_t checked = 0;
  std::size_t violations = 0;  ///< count with lhs - rhs > tol
  double worst_slack = 0.0;    ///< max over pairs of lhs - rhs (negative when all hold strictly)
};

/// |s1 - s2|_F^2 <= |s1^2 - s2^2|_*, per pair.
ViolationReport check_powers_stormer(const std::vector<WeightedPair>& pairs, double tol = 1e-10);

/// tr[s1 s2^T] <= |s1|_op |s2|_*, per pair.
ViolationReport check_holder_schatten(const std::vector<WeightedPair>& pairs, double tol = 1e-10);

}  // namespace decoupler
