#include "robustpred/predictors.hpp"

#include <sstream>

#include "robustpred/errors.hpp"

namespace robustpred {

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::optimistic:
      return "optimistic";
    case PredictorKind::conservative:
      return "conservative";
    case PredictorKind::oracle_restricted:
      return "oracle_restricted";
  }
  return "unknown";
}

namespace {

void check_centering(const SecondMoments& m, const Centering& c) {
  if (c.x_mean.size() != m.d() || c.z_mean.size() != m.q()) {
    throw ShapeError("centering dimensions do not match moments");
  }
}

}  // namespace

LinearPredictor OraclePredictor::restricted() const {
  LinearPredictor p;
  p.weights = alpha_w;
  p.kind = PredictorKind::oracle_restricted;
  p.centering = centering;
  return p;
}

Vector Imputer::impute(const Eigen::Ref<const Vector>& x_centered) const {
  if (x_centered.size() != gmat.cols()) throw ShapeError("imputer input dimension mismatch");
  return gmat * x_centered;
}

double constraint_residual(const SecondMoments& m, const Eigen::Ref<const Vector>& w) {
  if (m.q() == 0) return 0.0;
  return (m.szx * w - m.szy).lpNorm<Eigen::Infinity>();
}

LinearPredictor fit_optimistic(const SecondMoments& m, const Centering& c) {
  check_centering(m, c);
  LinearPredictor p;
  p.weights = pseudoinverse(m.sxx) * m.sxy;
  p.kind = PredictorKind::optimistic;
  p.centering = c;
  return p;
}

LinearPredictor fit_optimistic(const SecondMoments& m) {
  return fit_optimistic(m, Centering::zeros(m.d(), m.q()));
}

LinearPredictor fit_conservative(const SecondMoments& m, const Centering& c) {
  check_centering(m, c);
  if (m.d() <= m.q()) {
    std::ostringstream msg;
    msg << "conservative fit needs more observed than missing features (d=" << m.d()
        << ", q=" << m.q() << ")";
    throw ValidationError(msg.str());
  }
  const Vector anchor = m.q() == 0 ? Vector::Zero(m.d()) : Vector(pseudoinverse(m.szx) * m.szy);
  const Matrix pi = null_space_projector(m.szx);

  LinearPredictor p;
  p.weights = minimize_quadratic_on_affine(m, anchor, pi);
  p.kind = PredictorKind::conservative;
  p.centering = c;
  p.constraint_residual = constraint_residual(m, p.weights);
  const double scale = 1.0 + (m.q() == 0 ? 0.0 : m.szy.lpNorm<Eigen::Infinity>());
  p.constraint_infeasible = p.constraint_residual > 1e-8 * scale;
  return p;
}

LinearPredictor fit_conservative(const SecondMoments& m) {
  return fit_conservative(m, Centering::zeros(m.d(), m.q()));
}

OraclePredictor fit_oracle(const SecondMoments& m, const Centering& c) {
  check_centering(m, c);
  const Index d = m.d();
  const Index q = m.q();
  Matrix gram(d + q, d + q);
  gram.topLeftCorner(d, d) = m.sxx;
  gram.topRightCorner(d, q) = m.szx.transpose();
  gram.bottomLeftCorner(q, d) = m.szx;
  gram.bottomRightCorner(q, q) = m.szz;
  Vector rhs(d + q);
  rhs << m.sxy, m.szy;
  const Vector coef = pseudoinverse(gram) * rhs;

  OraclePredictor o;
  o.alpha_w = coef.head(d);
  o.beta_w = coef.tail(q);
  o.centering = c;
  return o;
}

OraclePredictor fit_oracle(const SecondMoments& m) {
  return fit_oracle(m, Centering::zeros(m.d(), m.q()));
}

Imputer fit_imputer(const SecondMoments& m) { return Imputer{m.szx * pseudoinverse(m.sxx)}; }

double predict(const LinearPredictor& p, const Eigen::Ref<const Vector>& x) {
  if (x.size() != p.weights.size()) {
    std::ostringstream msg;
    msg << "feature vector has dimension " << x.size() << ", predictor expects "
        << p.weights.size();
    throw ShapeError(msg.str());
  }
  return p.centering.y_mean + p.weights.dot(x - p.centering.x_mean);
}

Vector predict_rows(const LinearPredictor& p, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != p.weights.size()) throw ShapeError("feature matrix column count mismatch");
  return ((x.rowwise() - p.centering.x_mean.transpose()) * p.weights).array() +
         p.centering.y_mean;
}

double predict_oracle(const OraclePredictor& p, const Eigen::Ref<const Vector>& x,
                      const Eigen::Ref<const Vector>& z) {
  if (x.size() != p.alpha_w.size() || z.size() != p.beta_w.size()) {
    throw ShapeError("oracle input dimension mismatch");
  }
  return p.centering.y_mean + p.alpha_w.dot(x - p.centering.x_mean) +
         p.beta_w.dot(z - p.centering.z_mean);
}

Vector predict_oracle_rows(const OraclePredictor& p, const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Matrix>& z) {
  if (x.cols() != p.alpha_w.size() || z.cols() != p.beta_w.size() || x.rows() != z.rows()) {
    throw ShapeError("oracle input dimension mismatch");
  }
  Vector out = (x.rowwise() - p.centering.x_mean.transpose()) * p.alpha_w;
  out += (z.rowwise() - p.centering.z_mean.transpose()) * p.beta_w;
  return out.array() + p.centering.y_mean;
}

}  // namespace robustpred
