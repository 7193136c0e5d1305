#include <doctest.h>

#include <cmath>
#include <set>

#include "robustpred/datagen.hpp"
#include "robustpred/errors.hpp"
#include "test_util.hpp"

using namespace robustpred;
using testutil::max_abs;

namespace {

double corr(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

TEST_CASE("sample_t with a zero scale is all zeros") {
  const Matrix s = sample_t(3.0, Matrix::Zero(2, 2), 100, 1);
  CHECK(s.rows() == 100);
  CHECK(s.cols() == 2);
  CHECK(max_abs(s) == 0.0);
}

TEST_CASE("sample_t variance matches nu / (nu - 2)") {
  const Matrix s = sample_t(3.0, Matrix::Identity(1, 1), 1000000, 2);
  const double var = s.col(0).squaredNorm() / s.rows();
  CHECK(std::abs(var - 3.0) <= 0.3);

  const Matrix s5 = sample_t(5.0, 4.0 * Matrix::Identity(1, 1), 1000000, 3);
  CHECK(s5.col(0).squaredNorm() / s5.rows() == doctest::Approx(4.0 * 5.0 / 3.0).epsilon(0.05));
}

TEST_CASE("sample_t is deterministic given the seed") {
  Matrix scale(2, 2);
  scale << 2.0, 0.5, 0.5, 1.0;
  const Matrix a = sample_t(4.0, scale, 500, 77);
  const Matrix b = sample_t(4.0, scale, 500, 77);
  const Matrix c = sample_t(4.0, scale, 500, 78);
  CHECK((a.array() == b.array()).all());
  CHECK_FALSE((a.array() == c.array()).all());
}

TEST_CASE("sample_t reproduces the scale matrix") {
  Matrix scale(2, 2);
  scale << 2.0, 0.5, 0.5, 1.0;
  const Index n = 400000;
  const Matrix s = sample_t(6.0, scale, n, 4);
  const Matrix cov = (s.transpose() * s) / n * (4.0 / 6.0);
  CHECK(max_abs(cov - scale) <= 0.05);
}

TEST_CASE("sample_t rejects bad arguments") {
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(sample_t(3.0, indefinite, 10, 1), ValidationError);
  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.0, 1.0;
  CHECK_THROWS_AS(sample_t(3.0, asym, 10, 1), ValidationError);
  CHECK_THROWS_AS(sample_t(0.0, Matrix::Identity(1, 1), 10, 1), ValidationError);
  CHECK_THROWS_AS(sample_t(3.0, Matrix::Zero(2, 3), 10, 1), ShapeError);
}

TEST_CASE("generate_linear with all x sources off") {
  SyntheticConfig cfg;
  cfg.rho = 0.0;
  cfg.sigma_u = Matrix::Zero(3, 3);
  cfg.noise_x_var = 0.0;
  cfg.n = 200;
  const SyntheticData s = generate_linear(cfg);
  CHECK(max_abs(s.x) == 0.0);
  CHECK(s.z.cols() == 1);
  CHECK(s.x.cols() == 3);
}

TEST_CASE("generate_linear noiseless outcome identity") {
  SyntheticConfig cfg;
  cfg.noise_y_var = 0.0;
  cfg.n = 500;
  const SyntheticData s = generate_linear(cfg);
  for (Index i = 0; i < cfg.n; ++i) {
    CHECK(s.y(i) - (s.z(i, 0) + (s.x(i, 0) + s.x(i, 1) + s.x(i, 2))) == 0.0);
  }
}

TEST_CASE("generate_linear correlation under the calibrated scale") {
  SyntheticConfig cfg;
  cfg.rho = 0.7;
  cfg.sigma_u = calibrated_sigma_u(0.7);
  cfg.n = 1000000;
  cfg.seed = 9;
  const SyntheticData s = generate_linear(cfg);
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(corr(s.z.col(0), s.x.col(j)) - 0.7) <= 0.03);
  CHECK(s.z.col(0).squaredNorm() / cfg.n == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("generate_linear z is heavy tailed") {
  SyntheticConfig cfg;
  cfg.n = 1000000;
  cfg.seed = 10;
  const SyntheticData s = generate_linear(cfg);
  const Vector z = s.z.col(0);
  const double sd = std::sqrt((z.array() - z.mean()).square().mean());
  const double beyond = (((z.array() - z.mean()).abs() > 4.0 * sd).cast<double>()).mean();
  const double gaussian = std::erfc(4.0 / std::sqrt(2.0));
  CHECK(beyond >= 5.0 * gaussian);
}

TEST_CASE("generate_linear is deterministic and seed sensitive") {
  SyntheticConfig cfg;
  cfg.n = 300;
  cfg.seed = 42;
  const SyntheticData a = generate_linear(cfg);
  const SyntheticData b = generate_linear(cfg);
  CHECK((a.x.array() == b.x.array()).all());
  CHECK((a.z.array() == b.z.array()).all());
  CHECK((a.y.array() == b.y.array()).all());
  cfg.seed = 43;
  CHECK_FALSE((generate_linear(cfg).y.array() == a.y.array()).all());
}

TEST_CASE("generate_linear validates the config") {
  SyntheticConfig cfg;
  cfg.rho = 1.5;
  CHECK_THROWS_AS(generate_linear(cfg), ValidationError);
  cfg = SyntheticConfig{};
  cfg.noise_x_var = -1.0;
  CHECK_THROWS_AS(generate_linear(cfg), ValidationError);
  cfg = SyntheticConfig{};
  cfg.nu_z = 0.5;
  CHECK_THROWS_AS(generate_linear(cfg), ValidationError);
  cfg = SyntheticConfig{};
  cfg.sigma_u = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(generate_linear(cfg), ShapeError);
}

TEST_CASE("generate_poly returns the psi block") {
  PolyConfig cfg;
  cfg.base.n = 400;
  const SyntheticData s = generate_poly(cfg);
  CHECK(s.x.cols() == 3);
  CHECK(s.z.cols() == 2);
  CHECK(max_abs(s.z.col(1) - s.z.col(0).array().square().matrix()) == 0.0);
}

TEST_CASE("generate_poly structural cases") {
  PolyConfig cfg;
  cfg.base.n = 300;
  cfg.base.noise_y_var = 0.0;
  cfg.wz.setZero();
  cfg.wx.setZero();
  CHECK(max_abs(generate_poly(cfg).y) == 0.0);

  cfg.wz << 2.0, 0.0;
  const SyntheticData s = generate_poly(cfg);
  CHECK(max_abs(s.y - 2.0 * s.z.col(0)) <= 1e-15);

  cfg.wz << 1.0, 0.1;
  cfg.wx << 1, 1, 1, 0.5, 0, 0;
  const SyntheticData t = generate_poly(cfg);
  const Vector expected = t.z.col(0) + 0.1 * t.z.col(1) + t.x.rowwise().sum() +
                          0.5 * t.x.col(0).array().square().matrix();
  CHECK(max_abs(t.y - expected) <= 1e-12);
}

TEST_CASE("generate_poly requires five degrees of freedom") {
  PolyConfig cfg;
  cfg.base.nu_z = 3.0;
  CHECK_THROWS_AS(generate_poly(cfg), ValidationError);
  cfg.base.nu_z = 5.0;
  cfg.base.nu_u = 4.0;
  CHECK_THROWS_AS(generate_poly(cfg), ValidationError);
  cfg.base.nu_u = 5.0;
  cfg.wx = Vector::Ones(3);
  CHECK_THROWS_AS(generate_poly(cfg), ShapeError);
}

TEST_CASE("feature_map_quadratic") {
  Matrix x(2, 3);
  x << 1, 2, 3, 0, 0, 0;
  const Matrix phi = feature_map_quadratic(x);
  Matrix expected(2, 6);
  expected << 1, 2, 3, 1, 4, 9, 0, 0, 0, 0, 0, 0;
  CHECK(max_abs(phi - expected) == 0.0);

  const Matrix r = testutil::randn(5, 3, 3);
  const Matrix pr = feature_map_quadratic(r);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 3; ++j) {
      CHECK(pr(i, j) == r(i, j));
      CHECK(pr(i, j + 3) == r(i, j) * r(i, j));
    }
}

TEST_CASE("derive_seed separates runs and streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t run = 0; run < 100; ++run)
    for (std::uint64_t stream = 0; stream < 2; ++stream) seen.insert(derive_seed(1, run, stream));
  CHECK(seen.size() == 200);
  CHECK(derive_seed(1, 5, 0) == derive_seed(1, 5, 0));
  CHECK(derive_seed(1, 5, 0) != derive_seed(2, 5, 0));
}
