#pragma once

#include <cstdint>
#include <random>

#include "robustpred/linear_core.hpp"

namespace robustpred {

using Rng = std::mt19937_64;

/// Linear heavy-tailed process:
///   z ~ t(0, 1, nu_z),  x = 1 rho z + u + eps_x,  y = z + 1^T x + eps_y,
/// with u ~ t(0, sigma_u, nu_u) in R^3 and Gaussian eps. When normalize_t is
/// set (and nu > 2), t draws are divided by sqrt(nu / (nu - 2)) so that z has
/// unit variance and u has covariance sigma_u.
struct SyntheticConfig {
  double rho = 0.7;
  double nu_z = 3.0;
  double nu_u = 3.0;
  Matrix sigma_u = Matrix::Identity(3, 3);
  double noise_x_var = 0.01;
  double noise_y_var = 0.01;
  bool normalize_t = true;
  Index n = 100;
  std::uint64_t seed = 1;
};

/// Scale matrix (1 - rho^2) I_3, which makes corr(z, x_j) = rho exactly when
/// noise_x_var = 0 and t draws are normalized.
Matrix calibrated_sigma_u(double rho);

/// Quadratic process with psi(z) = [z, z^2] as the missing block:
///   y = wz^T psi(z) + wx^T phi(x) + eps_y,  phi(x) = [x, x.^2].
/// Both t degrees of freedom must be at least 5.
struct PolyConfig {
  SyntheticConfig base = [] {
    SyntheticConfig c;
    c.nu_z = 5.0;
    c.nu_u = 5.0;
    return c;
  }();
  Eigen::Vector2d wz = Eigen::Vector2d(1.0, 0.1);
  Vector wx = (Vector(6) << 1.0, 1.0, 1.0, 0.0, 0.0, 0.0).finished();
};

struct SyntheticData {
  Matrix x;  // n x 3 raw observable features
  Matrix z;  // n x q missing block (q = 1 linear, q = 2 poly)
  Vector y;
};

/// n x k multivariate t draws: (N(0, scale) row) / sqrt(chi2(dof) / dof), one
/// divisor per row. Throws ValidationError for dof <= 0 or non-PSD scale.
Matrix sample_t(double dof, const Eigen::Ref<const Matrix>& scale, Index n, Rng& rng);
Matrix sample_t(double dof, const Eigen::Ref<const Matrix>& scale, Index n, std::uint64_t seed);

SyntheticData generate_linear(const SyntheticConfig& cfg);
SyntheticData generate_poly(const PolyConfig& cfg);

/// [x, x.^2] column blocks, in that order.
Matrix feature_map_quadratic(const Eigen::Ref<const Matrix>& x);

/// Seed for (run, stream) under a master seed. Distinct runs and streams get
/// decorrelated seeds; the mapping is fixed so results replay exactly.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run, std::uint64_t stream);

void validate(const SyntheticConfig& cfg);
void validate(const PolyConfig& cfg);

}  // namespace robustpred
