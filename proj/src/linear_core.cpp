#include "robustpred/linear_core.hpp"

#include <sstream>

#include "robustpred/errors.hpp"

namespace robustpred {

void require_finite(const Eigen::Ref<const Matrix>& a, const char* what) {
  if (!a.allFinite()) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

SecondMoments accumulate_moments(const Eigen::Ref<const Matrix>& x,
                                 const Eigen::Ref<const Matrix>& z,
                                 const Eigen::Ref<const Vector>& y) {
  const Index n = x.rows();
  if (z.rows() != n || y.size() != n) {
    std::ostringstream msg;
    msg << "row count mismatch: X has " << n << ", Z has " << z.rows() << ", y has "
        << y.size();
    throw ShapeError(msg.str());
  }
  if (n < 1) throw ShapeError("at least one sample is required");
  require_finite(x, "X");
  require_finite(z, "Z");
  require_finite(y, "y");

  const double inv_n = 1.0 / static_cast<double>(n);
  SecondMoments m;
  m.n = n;
  m.sxx = symmetrized(x.transpose() * x * inv_n);
  m.szz = symmetrized(z.transpose() * z * inv_n);
  m.szx = z.transpose() * x * inv_n;
  m.sxy = x.transpose() * y * inv_n;
  m.szy = z.transpose() * y * inv_n;
  m.syy = y.squaredNorm() * inv_n;
  return m;
}

namespace {

Eigen::JacobiSVD<Matrix> svd_of(const Eigen::Ref<const Matrix>& a, int options) {
  require_finite(a, "matrix");
  return Eigen::JacobiSVD<Matrix>(a, options);
}

Index rank_from(const Vector& sv, double rel_tol) {
  if (sv.size() == 0) return 0;
  const double cutoff = rel_tol * sv(0);
  Index r = 0;
  while (r < sv.size() && sv(r) > cutoff) ++r;
  return r;
}

}  // namespace

Matrix pseudoinverse(const Eigen::Ref<const Matrix>& a, double rel_tol) {
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  auto svd = svd_of(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index r = rank_from(sv, rel_tol);
  if (r == 0) return Matrix::Zero(a.cols(), a.rows());
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  return v.leftCols(r) * sv.head(r).cwiseInverse().asDiagonal() *
         u.leftCols(r).transpose();
}

Index numerical_rank(const Eigen::Ref<const Matrix>& a, double rel_tol) {
  if (a.size() == 0) return 0;
  auto svd = svd_of(a, 0);
  return rank_from(svd.singularValues(), rel_tol);
}

Matrix null_space_projector(const Eigen::Ref<const Matrix>& a, double rel_tol) {
  const Index d = a.cols();
  Matrix eye = Matrix::Identity(d, d);
  if (a.size() == 0) return eye;
  auto svd = svd_of(a, Eigen::ComputeFullV);
  const Index r = rank_from(svd.singularValues(), rel_tol);
  if (r == 0) return eye;
  const auto vr = svd.matrixV().leftCols(r);
  return symmetrized(eye - vr * vr.transpose());
}

double empirical_mse(const SecondMoments& m, const Eigen::Ref<const Vector>& w) {
  if (w.size() != m.d()) throw ShapeError("weight dimension does not match moments");
  return m.syy - 2.0 * w.dot(m.sxy) + w.dot(m.sxx * w);
}

Vector minimize_quadratic_on_affine(const SecondMoments& m,
                                    const Eigen::Ref<const Vector>& w0,
                                    const Eigen::Ref<const Matrix>& pi) {
  const Index d = m.d();
  if (w0.size() != d || pi.rows() != d || pi.cols() != d) {
    throw ShapeError("anchor or projector dimension does not match moments");
  }
  // theta = (Pi^T Sxx Pi)^+ Pi^T (sxy - Sxx w0)
  const Matrix reduced = symmetrized(pi.transpose() * m.sxx * pi);
  const Vector rhs = pi.transpose() * (m.sxy - m.sxx * w0);
  const Vector theta = pseudoinverse(reduced) * rhs;
  return w0 + pi * theta;
}

}  // namespace robustpred
