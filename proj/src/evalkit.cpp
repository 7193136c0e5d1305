#include "robustpred/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "robustpred/errors.hpp"

namespace robustpred {

EvalReport evaluate(const Eigen::Ref<const Vector>& predictions, const Eigen::Ref<const Vector>& y,
                    const Eigen::Ref<const Matrix>& z, const OutlierRegion& region,
                    const Eigen::Ref<const Vector>& z_center) {
  const Index n = y.size();
  if (predictions.size() != n || z.rows() != n) throw ShapeError("test arrays are not aligned");
  if (z.cols() != region.q() || z_center.size() != region.q()) {
    throw ShapeError("z dimension does not match region");
  }
  if (n == 0) throw ValidationError("empty test set");

  EvalReport r;
  r.alpha = region.alpha;
  double sum_all = 0.0, sum_out = 0.0, sum_in = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double e = y(i) - predictions(i);
    const double se = e * e;
    sum_all += se;
    if (is_outlier(region, z.row(i).transpose() - z_center)) {
      sum_out += se;
      ++r.n_out;
    } else {
      sum_in += se;
      ++r.n_in;
    }
  }
  r.mse = sum_all / static_cast<double>(n);
  if (r.n_out > 0) r.mse_out = sum_out / static_cast<double>(r.n_out);
  if (r.n_in > 0) r.mse_in = sum_in / static_cast<double>(r.n_in);
  return r;
}

EvalReport evaluate(const PredictFn& predict_fn, const Eigen::Ref<const Matrix>& x,
                    const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Vector>& y,
                    const OutlierRegion& region, const Eigen::Ref<const Vector>& z_center) {
  if (x.rows() != y.size()) throw ShapeError("test arrays are not aligned");
  Vector pred(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    pred(i) = predict_fn(x.row(i).transpose(), z.row(i).transpose());
  }
  return evaluate(pred, y, z, region, z_center);
}

std::optional<double> delta_percent(const std::optional<double>& variant,
                                    const std::optional<double>& baseline) {
  if (!variant || !baseline || *baseline == 0.0) return std::nullopt;
  return 100.0 * (*variant - *baseline) / *baseline;
}

std::vector<CurvePoint> conditional_mse_curve(const Eigen::Ref<const Vector>& predictions,
                                              const Eigen::Ref<const Vector>& y,
                                              const Eigen::Ref<const Matrix>& z,
                                              const std::vector<double>& edges) {
  if (z.cols() != 1) {
    throw ValidationError("conditional MSE curves are defined for a single missing feature only");
  }
  if (predictions.size() != y.size() || z.rows() != y.size()) {
    throw ShapeError("test arrays are not aligned");
  }
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw ValidationError("curve bin edges must be strictly increasing with at least two entries");
  }
  const std::size_t bins = edges.size() - 1;
  std::vector<double> sums(bins, 0.0);
  std::vector<Index> counts(bins, 0);
  for (Index i = 0; i < y.size(); ++i) {
    const double v = z(i, 0);
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t b = static_cast<std::size_t>(it - edges.begin());
    b = b == 0 ? 0 : std::min(b - 1, bins - 1);
    const double e = y(i) - predictions(i);
    sums[b] += e * e;
    ++counts[b];
  }
  std::vector<CurvePoint> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = edges[b];
    out[b].hi = edges[b + 1];
    out[b].center = 0.5 * (edges[b] + edges[b + 1]);
    out[b].count = counts[b];
    if (counts[b] > 0) out[b].mse = sums[b] / static_cast<double>(counts[b]);
  }
  return out;
}

ExcessMseCheck excess_mse_check(const SecondMoments& m, const Eigen::Ref<const Vector>& w) {
  if (w.size() != m.d()) throw ShapeError("weight dimension does not match moments");
  if (m.q() == 0 || numerical_rank(m.szz) < m.q()) {
    throw ValidationError("E[z z^T] is singular; the excess MSE decomposition needs it invertible");
  }
  const Eigen::LDLT<Matrix> szz_solver(m.szz);
  const OraclePredictor oracle = fit_oracle(m);

  ExcessMseCheck c;
  c.gamma = szz_solver.solve(m.szx);
  c.resid_moment = symmetrized(m.sxx - m.szx.transpose() * c.gamma);
  c.mse_star = m.syy - oracle.alpha_w.dot(m.sxy) - oracle.beta_w.dot(m.szy);
  c.lhs = empirical_mse(m, w) - c.mse_star;
  const Vector diff = oracle.alpha_w - w;
  c.constraint = c.gamma * diff + oracle.beta_w;
  c.term_z = c.constraint.dot(m.szz * c.constraint);
  c.term_x = diff.dot(c.resid_moment * diff);
  c.rhs = c.term_z + c.term_x;
  return c;
}

Quartiles quartiles(std::vector<double> v) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (v.empty()) return {nan, nan, nan};
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

namespace {

struct RunData {
  Matrix x;
  Matrix z;
  Vector y;
};

RunData draw(const ExperimentConfig& cfg, Index n, std::uint64_t seed) {
  if (cfg.process == ProcessKind::linear) {
    SyntheticConfig c = cfg.linear;
    c.n = n;
    c.seed = seed;
    SyntheticData s = generate_linear(c);
    return {std::move(s.x), std::move(s.z), std::move(s.y)};
  }
  PolyConfig c = cfg.poly;
  c.base.n = n;
  c.base.seed = seed;
  SyntheticData s = generate_poly(c);
  if (cfg.pipeline == FeaturePipeline::quadratic) {
    return {feature_map_quadratic(s.x), std::move(s.z), std::move(s.y)};
  }
  return {std::move(s.x), s.z.leftCols(1), std::move(s.y)};
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, Index run) {
  RunRecord rec;
  rec.run = run;
  rec.train_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run), 0);
  rec.test_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run), 1);
  try {
    const RunData train = draw(cfg, cfg.n_train, rec.train_seed);
    const RunData test = draw(cfg, cfg.n_test, rec.test_seed);
    const RobustModel model = fit_robust(train.x, train.z, train.y, cfg.alpha);

    const Matrix zc = train.z.rowwise() - model.centering.z_mean.transpose();
    const Matrix xc = train.x.rowwise() - model.centering.x_mean.transpose();
    const Vector yc = train.y.array() - model.centering.y_mean;
    const OraclePredictor oracle = fit_oracle(accumulate_moments(xc, zc, yc), model.centering);

    const RobustBatch batch = predict_robust_rows(model, test.x);
    const std::array<Vector, 4> preds = {batch.optimistic, batch.conservative, batch.prediction,
                                         predict_oracle_rows(oracle, test.x, test.z)};
    for (std::size_t k = 0; k < preds.size(); ++k) {
      rec.reports[k] = evaluate(preds[k], test.y, test.z, model.region, model.centering.z_mean);
    }
    if (!cfg.curve_edges.empty() && test.z.cols() == 1) {
      std::array<std::vector<CurvePoint>, 4> curves;
      for (std::size_t k = 0; k < preds.size(); ++k) {
        curves[k] = conditional_mse_curve(preds[k], test.y, test.z, cfg.curve_edges);
      }
      rec.curve.resize(curves[0].size());
      for (std::size_t b = 0; b < rec.curve.size(); ++b)
        for (std::size_t k = 0; k < preds.size(); ++k) rec.curve[b][k] = curves[k][b];
    }
    rec.gate_b0 = model.gate.b0;
    rec.gate_b1 = model.gate.b1;
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

DeltaTable summarize_runs(std::vector<RunRecord> runs) {
  DeltaTable table;
  for (const auto& r : runs) table.n_failed += r.ok ? 0 : 1;

  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> d_in, d_out;
    Index used = 0;
    double sum_in = 0.0, base_in = 0.0, sum_out = 0.0, base_out = 0.0;
    for (const auto& r : runs) {
      if (!r.ok) continue;
      ++used;
      if (r.reports[k].mse_in && r.reports[0].mse_in) {
        sum_in += *r.reports[k].mse_in;
        base_in += *r.reports[0].mse_in;
      }
      if (r.reports[k].mse_out && r.reports[0].mse_out) {
        sum_out += *r.reports[k].mse_out;
        base_out += *r.reports[0].mse_out;
      }
      if (auto v = delta_percent(r.reports[k].mse_in, r.reports[0].mse_in)) d_in.push_back(*v);
      if (auto v = delta_percent(r.reports[k].mse_out, r.reports[0].mse_out)) d_out.push_back(*v);
    }
    auto mean = [](const std::vector<double>& v) {
      if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
      double s = 0.0;
      for (double e : v) s += e;
      return s / static_cast<double>(v.size());
    };
    DeltaRow row;
    row.predictor = kPredictorNames[k];
    row.mean_in = mean(d_in);
    row.mean_out = mean(d_out);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    row.pooled_in = base_in > 0.0 ? 100.0 * (sum_in - base_in) / base_in : nan;
    row.pooled_out = base_out > 0.0 ? 100.0 * (sum_out - base_out) / base_out : nan;
    row.in = quartiles(d_in);
    row.out = quartiles(d_out);
    row.runs_used = used;
    table.rows.push_back(std::move(row));
  }

  const RunRecord* first = nullptr;
  for (const auto& r : runs) {
    if (r.ok && !r.curve.empty()) {
      first = &r;
      break;
    }
  }
  if (first != nullptr) {
    for (std::size_t k = 0; k < kPredictorNames.size(); ++k) {
      for (std::size_t b = 0; b < first->curve.size(); ++b) {
        CurveSummary s;
        s.predictor = kPredictorNames[k];
        s.lo = first->curve[b][k].lo;
        s.hi = first->curve[b][k].hi;
        s.center = first->curve[b][k].center;
        std::vector<double> values;
        for (const auto& r : runs) {
          if (!r.ok || r.curve.size() != first->curve.size()) continue;
          const CurvePoint& p = r.curve[b][k];
          s.total_count += p.count;
          if (p.mse) values.push_back(*p.mse);
        }
        if (!values.empty()) {
          double sum = 0.0;
          for (double v : values) sum += v;
          s.mean_mse = sum / static_cast<double>(values.size());
        }
        s.spread = quartiles(values);
        table.curves.push_back(std::move(s));
      }
    }
  }
  table.runs = std::move(runs);
  return table;
}

DeltaTable run_mc_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_runs < 1) throw ValidationError("n_runs must be at least 1");
  if (cfg.n_train < 1 || cfg.n_test < 1) throw ValidationError("sample sizes must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  if (cfg.process == ProcessKind::linear) {
    validate(cfg.linear);
  } else {
    validate(cfg.poly);
  }

  std::vector<RunRecord> runs(static_cast<std::size_t>(cfg.n_runs));
  const unsigned workers =
      std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.n_runs)));
  if (workers == 1) {
    for (Index r = 0; r < cfg.n_runs; ++r) runs[static_cast<std::size_t>(r)] = run_single(cfg, r);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (Index r = next++; r < cfg.n_runs; r = next++) {
          runs[static_cast<std::size_t>(r)] = run_single(cfg, r);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return summarize_runs(std::move(runs));
}

}  // namespace robustpred
