#pragma once

#include <string>
#include <vector>

#include "robustpred/linear_core.hpp"
#include "robustpred/outlier_gate.hpp"
#include "robustpred/predictors.hpp"

namespace robustpred {

struct RobustFitInfo {
  Index n = 0;
  Index n_outliers = 0;  // training rows with z in the tail region
  Index n_inliers = 0;
  std::vector<std::string> warnings;
};

/// Optimistic and conservative predictors blended by a logistic gate on the
/// imputed-z statistic delta(x). Immutable once fitted.
struct RobustModel {
  LinearPredictor optimistic;
  LinearPredictor conservative;
  Imputer imputer;
  OutlierRegion region;
  LogisticGate gate;
  Centering centering;
  RobustFitInfo info;

  double alpha() const { return region.alpha; }
  Index d() const { return optimistic.weights.size(); }
  Index q() const { return region.q(); }
};

/// Learns the robust predictor from raw (uncentered) training data:
///   1. center with training means and accumulate second moments;
///   2. fit the optimistic and conservative weights;
///   3. label each training row by tail-region membership of z and pair it
///      with delta(x);
///   4. fit the logistic gate on those pairs.
/// Throws SingleClassError when alpha leaves one label class empty.
RobustModel fit_robust(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& z,
                       const Eigen::Ref<const Vector>& y, double alpha);

/// delta(x) for a raw feature vector.
double robust_delta(const RobustModel& model, const Eigen::Ref<const Vector>& x);

/// Gate output p_hat = P{z in tail | x} for a raw feature vector.
double robust_outlier_probability(const RobustModel& model, const Eigen::Ref<const Vector>& x);

/// (1 - p_hat) w_opt + p_hat w_con.
Vector adaptive_weights(const RobustModel& model, const Eigen::Ref<const Vector>& x);

double predict_robust(const RobustModel& model, const Eigen::Ref<const Vector>& x);

/// Per-row predictions with the gate output and delta statistic alongside.
struct RobustBatch {
  Vector prediction;
  Vector optimistic;
  Vector conservative;
  Vector p_outlier;
  Vector delta;
};

RobustBatch predict_robust_rows(const RobustModel& model, const Eigen::Ref<const Matrix>& x);

}  // namespace robustpred
