#pragma once

#include <optional>
#include <span>

#include "robustpred/linear_core.hpp"
#include "robustpred/predictors.hpp"

namespace robustpred {

/// Tail region {z : z^T M^+ z >= q / alpha} on centered z, where M is the
/// training second moment E_n[z z^T].
struct OutlierRegion {
  Matrix minv;  // q x q, symmetric PSD
  double alpha = 1.0;

  Index q() const { return minv.rows(); }
  double threshold() const { return static_cast<double>(q()) / alpha; }
};

/// Region from the training z block. alpha must lie in (0, 1].
OutlierRegion fit_region(const SecondMoments& m, double alpha);

/// z^T Minv z for a centered z.
double mahalanobis_stat(const OutlierRegion& region, const Eigen::Ref<const Vector>& z);

/// Boundary ties count as outliers.
bool is_outlier(const OutlierRegion& region, const Eigen::Ref<const Vector>& z);

/// sqrt(z_hat^T Minv z_hat) with z_hat = G x on centered x.
double delta_stat(const OutlierRegion& region, const Imputer& imputer,
                  const Eigen::Ref<const Vector>& x_centered);

struct GateDiagnostics {
  double cross_entropy = 0.0;
  int iterations = 0;
  bool converged = false;
  bool capped = false;  // hit the |b| <= kGateParamCap box (separable data)
};

inline constexpr double kGateParamCap = 1e3;
inline constexpr double kGateGradTol = 1e-8;
inline constexpr int kGateMaxIter = 500;

/// P{outlier | delta} = sigmoid(b0 + b1 * delta).
///
/// Equivalent to 1 / (1 + exp(kappa (delta - delta0))) with kappa = -b1 and
/// delta0 = -b0 / b1; the (kappa, delta0) view is undefined when b1 == 0.
struct LogisticGate {
  double b0 = 0.0;
  double b1 = 0.0;
  GateDiagnostics diagnostics;

  std::optional<double> kappa() const;
  std::optional<double> delta0() const;

  static LogisticGate from_kappa_delta0(double kappa, double delta0);
};

struct GatePair {
  double delta = 0.0;
  bool outlier = false;
};

/// Mean cross-entropy of sigmoid(b0 + b1 delta) against the labels.
double gate_cross_entropy(double b0, double b1, std::span<const GatePair> pairs);

/// Minimizes gate_cross_entropy by damped Newton. Throws SingleClassError when
/// all labels agree.
LogisticGate fit_gate(std::span<const GatePair> pairs);

/// Always strictly inside (0, 1); saturated logits are clamped one ulp away
/// from the endpoints.
double prob_outlier(const LogisticGate& gate, double delta);

}  // namespace robustpred
