#pragma once

#include <Eigen/Dense>

namespace robustpred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative singular-value cutoff used by every pseudoinverse in the library.
inline constexpr double kPinvRelTol = 1e-10;

/// Sample second moments E_n[.] of centered (x, z, y) triples, kept as
/// separate blocks. All blocks are sample means (division by n).
struct SecondMoments {
  Matrix sxx;  // d x d, E_n[x x^T]
  Matrix szx;  // q x d, E_n[z x^T]
  Matrix szz;  // q x q, E_n[z z^T]
  Vector sxy;  // d,     E_n[x y]
  Vector szy;  // q,     E_n[z y]
  double syy = 0.0;
  Index n = 0;

  Index d() const { return sxx.rows(); }
  Index q() const { return szz.rows(); }
};

/// Throws ValidationError when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& a, const char* what);

/// Accumulates E_n blocks from row-aligned, already-centered samples.
/// Gram blocks are symmetrized as (A + A^T) / 2.
SecondMoments accumulate_moments(const Eigen::Ref<const Matrix>& x,
                                 const Eigen::Ref<const Matrix>& z,
                                 const Eigen::Ref<const Vector>& y);

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// rel_tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Eigen::Ref<const Matrix>& a, double rel_tol = kPinvRelTol);

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Eigen::Ref<const Matrix>& a, double rel_tol = kPinvRelTol);

/// Orthogonal projector onto the null space of a (q x d): I - V_r V_r^T.
Matrix null_space_projector(const Eigen::Ref<const Matrix>& a, double rel_tol = kPinvRelTol);

/// E_n[|y - w^T x|^2] expressed through the moments.
double empirical_mse(const SecondMoments& m, const Eigen::Ref<const Vector>& w);

/// Minimizes the empirical MSE over the affine set {w0 + Pi theta}.
Vector minimize_quadratic_on_affine(const SecondMoments& m,
                                    const Eigen::Ref<const Vector>& w0,
                                    const Eigen::Ref<const Matrix>& pi);

inline Matrix symmetrized(const Eigen::Ref<const Matrix>& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace robustpred
