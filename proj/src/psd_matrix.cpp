#include "psd_matrix.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace decoupler {

namespace {

void require_finite(const Mat& a) {
  if (!a.allFinite()) fail(ErrorKind::InvalidArgument, "matrix has non-finite entries");
}

Eigen::VectorXd singular_values(const Mat& a) {
  if (a.size() == 0) return Eigen::VectorXd();
  return Eigen::JacobiSVD<Mat>(a).singularValues();
}

}  // namespace

MatrixNorms matrix_norms(const Mat& a) {
  require_finite(a);
  MatrixNorms n;
  if (a.size() == 0) return n;
  const Eigen::VectorXd s = singular_values(a);
  n.frobenius = a.norm();
  n.op = s.maxCoeff();
  n.nuclear = s.sum();
  return n;
}

bool is_symmetric(const Mat& a) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.norm());
}

void check_psd(const Mat& a) {
  require_finite(a);
  if (!is_symmetric(a)) fail(ErrorKind::NotPsd, "matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double scale = 1.0 + es.eigenvalues().cwiseAbs().maxCoeff();
  if (lo < -1e-10 * scale) {
    std::ostringstream os;
    os << "not psd: smallest eigenvalue " << lo;
    fail(ErrorKind::NotPsd, os.str());
  }
}

Mat psd_sqrt(const Mat& a) {
  require_finite(a);
  if (!is_symmetric(a)) fail(ErrorKind::NotPsd, "psd_sqrt: matrix is not symmetric");
  if (a.rows() == 1) return Mat::Constant(1, 1, psd_sqrt(a(0, 0)));
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = 1.0 + ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10 * scale) {
      std::ostringstream os;
      os << "not psd: eigenvalue " << ev(i);
      fail(ErrorKind::NotPsd, os.str());
    }
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  const Mat& v = es.eigenvectors();
  Mat s = v * ev.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

double psd_sqrt(double a) {
  if (!std::isfinite(a)) fail(ErrorKind::InvalidArgument, "psd_sqrt: non-finite input");
  if (a < 0.0) {
    if (a < -1e-10 * (1.0 + std::abs(a))) fail(ErrorKind::NotPsd, "not psd: negative scalar");
    return 0.0;
  }
  return std::sqrt(a);
}

ReverseTriangle check_reverse_triangle(const std::vector<WeightedPair>& dist) {
  require(!dist.empty(), "check_reverse_triangle: empty distribution");
  const auto m = dist.front().s1.rows();
  double wsum = 0.0;
  for (const auto& p : dist) {
    require(p.weight >= 0.0, "check_reverse_triangle: negative weight");
    wsum += p.weight;
  }
  require(wsum > 0.0, "check_reverse_triangle: weights sum to zero");
  // sqrt(E s^2) = sqrt(A^T A) for the stacked A = [sqrt(w_i) s_i]; the SVD of A keeps
  // small singular values accurate where an eigen-root of A^T A would lose half the digits.
  const Eigen::Index n = Eigen::Index(dist.size());
  Mat a1(n * m, m), a2(n * m, m);
  double diff2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = dist[std::size_t(i)];
    require(p.s1.rows() == m && p.s2.rows() == m, "check_reverse_triangle: dimension mismatch");
    const double w = p.weight / wsum;
    a1.middleRows(i * m, m) = std::sqrt(w) * p.s1;
    a2.middleRows(i * m, m) = std::sqrt(w) * p.s2;
    diff2 += w * (p.s1 - p.s2).squaredNorm();
  }
  auto root = [](const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinV);
    const Mat& v = svd.matrixV();
    return Mat(v * svd.singularValues().asDiagonal() * v.transpose());
  };
  ReverseTriangle r;
  r.lhs = (root(a1) - root(a2)).norm();
  r.rhs = std::sqrt(diff2);
  r.violation = std::max(0.0, r.lhs - r.rhs);
  return r;
}

ViolationReport check_powers_stormer(const std::vector<WeightedPair>& pairs, double tol) {
  ViolationReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    const double lhs = (p.s1 - p.s2).squaredNorm();
    const double rhs = matrix_norms(p.s1 * p.s1 - p.s2 * p.s2).nuclear;
    const double slack = lhs - rhs;
    rep.worst_slack = std::max(rep.worst_slack, slack);
    if (slack > tol * (1.0 + rhs)) ++rep.violations;
    ++rep.checked;
  }
  return rep;
}

ViolationReport check_holder_schatten(const std::vector<WeightedPair>& pairs, double tol) {
  ViolationReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    const double lhs = (p.s1 * p.s2.transpose()).trace();
    const double rhs = matrix_norms(p.s1).op * matrix_norms(p.s2).nuclear;
    const double slack = lhs - rhs;
    rep.worst_slack = std::max(rep.worst_slack, slack);
    if (slack > tol * (1.0 + rhs)) ++rep.violations;
    ++rep.checked;
  }
  return rep;
}

}  // namespace decoupler
