#include "robustpred/datagen.hpp"

#include <cmath>
#include <sstream>

#include "robustpred/errors.hpp"

namespace robustpred {

namespace {

// L with L L^T = scale, via the symmetric eigendecomposition so singular
// scales are accepted.
Matrix psd_factor(const Eigen::Ref<const Matrix>& scale) {
  if (scale.rows() != scale.cols()) throw ShapeError("scale matrix must be square");
  require_finite(scale, "scale matrix");
  const double mag = std::max(1.0, scale.cwiseAbs().maxCoeff());
  if ((scale - scale.transpose()).cwiseAbs().maxCoeff() > 1e-12 * mag) {
    throw ValidationError("scale matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(scale));
  const Vector& ev = eig.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -1e-12 * mag) {
    std::ostringstream msg;
    msg << "scale matrix is not positive semidefinite (eigenvalue " << ev.minCoeff() << ")";
    throw ValidationError(msg.str());
  }
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

double t_normalizer(double nu, bool normalize) {
  return (normalize && nu > 2.0) ? std::sqrt(nu / (nu - 2.0)) : 1.0;
}

Matrix gaussian(Index n, Index k, double var, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, k);
  const double sd = std::sqrt(var);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) out(i, j) = sd * normal(rng);
  return out;
}

struct LinearDraw {
  Vector z;
  Matrix x;
};

LinearDraw draw_linear_features(const SyntheticConfig& cfg, Rng& rng) {
  const Matrix one = Matrix::Identity(1, 1);
  LinearDraw d;
  d.z = sample_t(cfg.nu_z, one, cfg.n, rng).col(0) / t_normalizer(cfg.nu_z, cfg.normalize_t);
  const Matrix u = sample_t(cfg.nu_u, cfg.sigma_u, cfg.n, rng) / t_normalizer(cfg.nu_u, cfg.normalize_t);
  const Matrix eps_x = gaussian(cfg.n, 3, cfg.noise_x_var, rng);
  d.x = (cfg.rho * d.z) * Eigen::RowVector3d::Ones() + u + eps_x;
  return d;
}

}  // namespace

Matrix calibrated_sigma_u(double rho) {
  return (1.0 - rho * rho) * Matrix::Identity(3, 3);
}

void validate(const SyntheticConfig& cfg) {
  if (!(std::abs(cfg.rho) <= 1.0)) throw ValidationError("rho must lie in [-1, 1]");
  if (!(cfg.nu_z >= 1.0) || !(cfg.nu_u >= 1.0)) {
    throw ValidationError("t degrees of freedom must be at least 1");
  }
  if (!(cfg.noise_x_var >= 0.0) || !(cfg.noise_y_var >= 0.0)) {
    throw ValidationError("noise variances must be nonnegative");
  }
  if (cfg.sigma_u.rows() != 3 || cfg.sigma_u.cols() != 3) {
    throw ShapeError("sigma_u must be 3 x 3");
  }
  if (cfg.n < 1) throw ValidationError("sample count must be positive");
  psd_factor(cfg.sigma_u);
}

void validate(const PolyConfig& cfg) {
  validate(cfg.base);
  if (cfg.base.nu_z < 5.0 || cfg.base.nu_u < 5.0) {
    throw ValidationError(
        "polynomial process needs nu_z >= 5 and nu_u >= 5 so the quadratic terms have "
        "finite variance");
  }
  if (cfg.wx.size() != 6) throw ShapeError("wx must have 6 entries");
}

Matrix sample_t(double dof, const Eigen::Ref<const Matrix>& scale, Index n, Rng& rng) {
  if (!(dof > 0.0)) throw ValidationError("t degrees of freedom must be positive");
  const Matrix factor = psd_factor(scale);
  const Index k = scale.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(dof);
  Matrix out(n, k);
  Vector g(k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) g(j) = normal(rng);
    const double w = std::sqrt(chi2(rng) / dof);
    out.row(i) = (factor * g).transpose() / w;
  }
  return out;
}

Matrix sample_t(double dof, const Eigen::Ref<const Matrix>& scale, Index n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_t(dof, scale, n, rng);
}

SyntheticData generate_linear(const SyntheticConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  LinearDraw d = draw_linear_features(cfg, rng);
  const Matrix eps_y = gaussian(cfg.n, 1, cfg.noise_y_var, rng);
  SyntheticData out;
  out.y.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) {
    out.y(i) = d.z(i) + (d.x(i, 0) + d.x(i, 1) + d.x(i, 2)) + eps_y(i, 0);
  }
  out.z = d.z;
  out.x = std::move(d.x);
  return out;
}

SyntheticData generate_poly(const PolyConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.base.seed);
  LinearDraw d = draw_linear_features(cfg.base, rng);
  const Matrix eps_y = gaussian(cfg.base.n, 1, cfg.base.noise_y_var, rng);
  SyntheticData out;
  out.z.resize(cfg.base.n, 2);
  out.z.col(0) = d.z;
  out.z.col(1) = d.z.array().square();
  const Matrix phi = feature_map_quadratic(d.x);
  out.y = out.z * cfg.wz + phi * cfg.wx + eps_y.col(0);
  out.x = std::move(d.x);
  return out;
}

Matrix feature_map_quadratic(const Eigen::Ref<const Matrix>& x) {
  Matrix out(x.rows(), 2 * x.cols());
  out.leftCols(x.cols()) = x;
  out.rightCols(x.cols()) = x.array().square().matrix();
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run, std::uint64_t stream) {
  // splitmix64 finalizer over a mixed key
  auto mix = [](std::uint64_t v) {
    v += 0x9e3779b97f4a7c15ULL;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
  };
  return mix(mix(mix(master) ^ run) ^ (stream * 0xd6e8feb86659fd93ULL));
}

}  // namespace robustpred
