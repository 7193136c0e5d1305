#include "robustpred/outlier_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "robustpred/errors.hpp"

namespace robustpred {

OutlierRegion fit_region(const SecondMoments& m, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << alpha;
    throw ValidationError(msg.str());
  }
  return OutlierRegion{symmetrized(pseudoinverse(m.szz)), alpha};
}

double mahalanobis_stat(const OutlierRegion& region, const Eigen::Ref<const Vector>& z) {
  if (z.size() != region.q()) throw ShapeError("z dimension does not match region");
  // The metric is PSD, so any negative value is rounding noise.
  return std::max(0.0, z.dot(region.minv * z));
}

bool is_outlier(const OutlierRegion& region, const Eigen::Ref<const Vector>& z) {
  return mahalanobis_stat(region, z) >= region.threshold();
}

double delta_stat(const OutlierRegion& region, const Imputer& imputer,
                  const Eigen::Ref<const Vector>& x_centered) {
  if (imputer.gmat.rows() != region.q()) throw ShapeError("imputer and region disagree on q");
  const Vector zhat = imputer.impute(x_centered);
  const double quad = zhat.dot(region.minv * zhat);
  if (quad < -1e-12) {
    std::ostringstream msg;
    msg << "negative quadratic form " << quad << " in delta statistic";
    throw NumericalError(msg.str());
  }
  return std::sqrt(std::max(0.0, quad));
}

std::optional<double> LogisticGate::kappa() const {
  if (std::abs(b1) <= 1e-12) return std::nullopt;
  return -b1;
}

std::optional<double> LogisticGate::delta0() const {
  if (std::abs(b1) <= 1e-12) return std::nullopt;
  return -b0 / b1;
}

LogisticGate LogisticGate::from_kappa_delta0(double kappa, double delta0) {
  LogisticGate g;
  g.b1 = -kappa;
  g.b0 = kappa * delta0;
  return g;
}

namespace {

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow.
double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

struct Derivatives {
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

Derivatives derivatives(const Eigen::Vector2d& b, std::span<const GatePair> pairs) {
  Derivatives out;
  for (const auto& p : pairs) {
    const double prob = sigmoid(b(0) + b(1) * p.delta);
    const double r = prob - (p.outlier ? 1.0 : 0.0);
    const double w = prob * (1.0 - prob);
    out.grad(0) += r;
    out.grad(1) += r * p.delta;
    out.hess(0, 0) += w;
    out.hess(0, 1) += w * p.delta;
    out.hess(1, 1) += w * p.delta * p.delta;
  }
  out.hess(1, 0) = out.hess(0, 1);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  out.grad *= inv_n;
  out.hess *= inv_n;
  return out;
}

Eigen::Vector2d clip_to_cap(Eigen::Vector2d b) {
  return b.cwiseMax(-kGateParamCap).cwiseMin(kGateParamCap);
}

// Strictly separable labels have no finite cross-entropy minimizer. Returns a
// step at the class midpoint scaled so that max(|b0|, |b1|) hits the cap.
std::optional<LogisticGate> separated_gate(std::span<const GatePair> pairs) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double in_lo = inf, in_hi = -inf, out_lo = inf, out_hi = -inf;
  for (const auto& p : pairs) {
    if (p.outlier) {
      out_lo = std::min(out_lo, p.delta);
      out_hi = std::max(out_hi, p.delta);
    } else {
      in_lo = std::min(in_lo, p.delta);
      in_hi = std::max(in_hi, p.delta);
    }
  }
  double sign = 0.0, mid = 0.0;
  if (in_hi < out_lo) {
    sign = 1.0;
    mid = 0.5 * (in_hi + out_lo);
  } else if (out_hi < in_lo) {
    sign = -1.0;
    mid = 0.5 * (out_hi + in_lo);
  } else {
    return std::nullopt;
  }
  LogisticGate g;
  g.b1 = sign * kGateParamCap / std::max(1.0, mid);
  g.b0 = -g.b1 * mid;
  return g;
}

}  // namespace

double gate_cross_entropy(double b0, double b1, std::span<const GatePair> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    const double s = b0 + b1 * p.delta;
    // -[y log sigma(s) + (1-y) log(1 - sigma(s))] = softplus(s) - y s
    total += softplus(s) - (p.outlier ? s : 0.0);
  }
  return total / static_cast<double>(pairs.size());
}

LogisticGate fit_gate(std::span<const GatePair> pairs) {
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.delta) || p.delta < 0.0) {
      throw ValidationError("gate inputs must be finite and nonnegative");
    }
    positives += p.outlier ? 1 : 0;
  }
  if (positives == 0 || positives == pairs.size()) {
    std::ostringstream msg;
    msg << "all " << pairs.size() << " training samples are "
        << (positives == 0 ? "inliers" : "outliers")
        << "; the outlier gate needs both classes. Use a larger alpha so that enough "
           "training samples fall in the tail region.";
    throw SingleClassError(msg.str());
  }

  LogisticGate gate;
  if (auto sharp = separated_gate(pairs)) {
    gate = *sharp;
    gate.diagnostics.cross_entropy = gate_cross_entropy(gate.b0, gate.b1, pairs);
    gate.diagnostics.capped = true;
    gate.diagnostics.converged = false;
    return gate;
  }

  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  double ce = gate_cross_entropy(b(0), b(1), pairs);
  int iter = 0;
  bool converged = false;
  for (; iter < kGateMaxIter; ++iter) {
    const Derivatives dv = derivatives(b, pairs);
    if (dv.grad.norm() <= kGateGradTol) {
      converged = true;
      break;
    }
    const Eigen::Vector2d step = -(pseudoinverse(dv.hess) * dv.grad);
    double t = 1.0;
    bool accepted = false;
    Eigen::Vector2d trial;
    double trial_ce = ce;
    while (t > 1e-12) {
      trial = clip_to_cap(b + t * step);
      trial_ce = gate_cross_entropy(trial(0), trial(1), pairs);
      if (trial_ce <= ce) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || trial == b) break;
    b = trial;
    ce = trial_ce;
  }
  gate.b0 = b(0);
  gate.b1 = b(1);
  gate.diagnostics.cross_entropy = ce;
  gate.diagnostics.iterations = iter;
  gate.diagnostics.capped = b.cwiseAbs().maxCoeff() >= kGateParamCap;
  gate.diagnostics.converged = converged && !gate.diagnostics.capped;
  return gate;
}

double prob_outlier(const LogisticGate& gate, double delta) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(sigmoid(gate.b0 + gate.b1 * delta), lo, hi);
}

}  // namespace robustpred
