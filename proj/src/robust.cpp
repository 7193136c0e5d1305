#include "robustpred/robust.hpp"

#include <sstream>

#include "robustpred/errors.hpp"

namespace robustpred {

RobustModel fit_robust(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& z,
                       const Eigen::Ref<const Vector>& y, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1], got " << alpha;
    throw ValidationError(msg.str());
  }
  if (z.rows() != x.rows() || y.size() != x.rows()) {
    throw ShapeError("X, Z and y must have the same number of rows");
  }
  require_finite(x, "X");
  require_finite(z, "Z");
  require_finite(y, "y");

  RobustModel model;
  model.centering.x_mean = x.colwise().mean().transpose();
  model.centering.z_mean = z.colwise().mean().transpose();
  model.centering.y_mean = y.size() > 0 ? y.mean() : 0.0;
  const Matrix xc = x.rowwise() - model.centering.x_mean.transpose();
  const Matrix zc = z.rowwise() - model.centering.z_mean.transpose();
  const Vector yc = y.array() - model.centering.y_mean;
  const SecondMoments m = accumulate_moments(xc, zc, yc);

  model.info.n = m.n;
  if (m.n < m.d() + m.q()) {
    std::ostringstream msg;
    msg << "only " << m.n << " training samples for d + q = " << m.d() + m.q()
        << " features; estimates rely on pseudoinverses";
    model.info.warnings.push_back(msg.str());
  }

  model.optimistic = fit_optimistic(m, model.centering);
  model.conservative = fit_conservative(m, model.centering);
  if (model.conservative.constraint_infeasible) {
    std::ostringstream msg;
    msg << "E_n[z x^T] is rank deficient; conservative constraint residual "
        << model.conservative.constraint_residual;
    model.info.warnings.push_back(msg.str());
  }
  model.imputer = fit_imputer(m);
  model.region = fit_region(m, alpha);

  std::vector<GatePair> pairs(static_cast<std::size_t>(m.n));
  for (Index i = 0; i < m.n; ++i) {
    auto& p = pairs[static_cast<std::size_t>(i)];
    p.delta = delta_stat(model.region, model.imputer, xc.row(i).transpose());
    p.outlier = is_outlier(model.region, zc.row(i).transpose());
    model.info.n_outliers += p.outlier ? 1 : 0;
  }
  model.info.n_inliers = m.n - model.info.n_outliers;
  model.gate = fit_gate(pairs);
  if (model.gate.diagnostics.capped) {
    model.info.warnings.push_back(
        "training labels are perfectly separated by delta; gate is a capped sharp threshold");
  }
  return model;
}

double robust_delta(const RobustModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.d()) throw ShapeError("feature vector dimension mismatch");
  return delta_stat(model.region, model.imputer, x - model.centering.x_mean);
}

double robust_outlier_probability(const RobustModel& model, const Eigen::Ref<const Vector>& x) {
  return prob_outlier(model.gate, robust_delta(model, x));
}

Vector adaptive_weights(const RobustModel& model, const Eigen::Ref<const Vector>& x) {
  const double p = robust_outlier_probability(model, x);
  return (1.0 - p) * model.optimistic.weights + p * model.conservative.weights;
}

double predict_robust(const RobustModel& model, const Eigen::Ref<const Vector>& x) {
  const double p = robust_outlier_probability(model, x);
  return (1.0 - p) * predict(model.optimistic, x) + p * predict(model.conservative, x);
}

RobustBatch predict_robust_rows(const RobustModel& model, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != model.d()) throw ShapeError("feature matrix column count mismatch");
  const Index n = x.rows();
  RobustBatch out;
  out.optimistic = predict_rows(model.optimistic, x);
  out.conservative = predict_rows(model.conservative, x);
  const Matrix xc = x.rowwise() - model.centering.x_mean.transpose();
  // z_hat for all rows at once, then the quadratic form row by row.
  const Matrix zhat = xc * model.imputer.gmat.transpose();
  const Matrix mz = zhat * model.region.minv;
  out.delta.resize(n);
  out.p_outlier.resize(n);
  out.prediction.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double quad = zhat.row(i).dot(mz.row(i));
    if (quad < -1e-12) throw NumericalError("negative quadratic form in delta statistic");
    out.delta(i) = std::sqrt(std::max(0.0, quad));
    const double p = prob_outlier(model.gate, out.delta(i));
    out.p_outlier(i) = p;
    out.prediction(i) = (1.0 - p) * out.optimistic(i) + p * out.conservative(i);
  }
  return out;
}

}  // namespace robustpred
