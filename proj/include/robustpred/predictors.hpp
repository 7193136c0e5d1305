#pragma once

#include <string_view>

#include "robustpred/linear_core.hpp"

namespace robustpred {

/// Training means removed before fitting and restored at prediction time.
struct Centering {
  Vector x_mean;
  Vector z_mean;
  double y_mean = 0.0;

  static Centering zeros(Index d, Index q) {
    return {Vector::Zero(d), Vector::Zero(q), 0.0};
  }
};

enum class PredictorKind { optimistic, conservative, oracle_restricted };

std::string_view to_string(PredictorKind kind);

/// w^T x predictor on observable features with its training centering.
struct LinearPredictor {
  Vector weights;
  PredictorKind kind = PredictorKind::optimistic;
  Centering centering;
  // Populated for conservative fits: ||Szx w - szy||_inf at fit time.
  double constraint_residual = 0.0;
  bool constraint_infeasible = false;
};

/// Infeasible predictor that also sees z: alpha^T x + beta^T z.
struct OraclePredictor {
  Vector alpha_w;
  Vector beta_w;
  Centering centering;

  /// The x-part alone, usable as an ordinary predictor.
  LinearPredictor restricted() const;
};

/// Linear regression imputer z_hat(x) = G x on centered x.
struct Imputer {
  Matrix gmat;  // q x d

  Vector impute(const Eigen::Ref<const Vector>& x_centered) const;
};

/// Unconstrained least squares: Sxx^+ sxy.
LinearPredictor fit_optimistic(const SecondMoments& m, const Centering& c);
LinearPredictor fit_optimistic(const SecondMoments& m);

/// Least squares subject to Szx w = szy, solved as anchor + null-space step.
/// Requires d > q. A rank-deficient Szx is flagged via constraint_infeasible
/// when the pseudoinverse anchor leaves a residual.
LinearPredictor fit_conservative(const SecondMoments& m, const Centering& c);
LinearPredictor fit_conservative(const SecondMoments& m);

/// Joint (d+q) normal equations, solved with a pseudoinverse.
OraclePredictor fit_oracle(const SecondMoments& m, const Centering& c);
OraclePredictor fit_oracle(const SecondMoments& m);

Imputer fit_imputer(const SecondMoments& m);

/// y_mean + w^T (x - x_mean) for a raw feature vector.
double predict(const LinearPredictor& p, const Eigen::Ref<const Vector>& x);

/// Row-wise predict over a raw feature matrix.
Vector predict_rows(const LinearPredictor& p, const Eigen::Ref<const Matrix>& x);

double predict_oracle(const OraclePredictor& p, const Eigen::Ref<const Vector>& x,
                      const Eigen::Ref<const Vector>& z);

Vector predict_oracle_rows(const OraclePredictor& p, const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Matrix>& z);

/// ||Szx w - szy||_inf, the empirical violation of E_n[z (y - w^T x)] = 0.
double constraint_residual(const SecondMoments& m, const Eigen::Ref<const Vector>& w);

}  // namespace robustpred
