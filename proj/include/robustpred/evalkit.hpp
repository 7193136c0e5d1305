#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustpred/datagen.hpp"
#include "robustpred/outlier_gate.hpp"
#include "robustpred/robust.hpp"

namespace robustpred {

/// MSE split by tail-region membership of the (unseen) z. A bucket with no
/// rows has no MSE.
struct EvalReport {
  double mse = 0.0;
  std::optional<double> mse_out;
  std::optional<double> mse_in;
  Index n_out = 0;
  Index n_in = 0;
  double alpha = 0.0;
};

/// Scores precomputed predictions. z rows are raw; z_center (training z
/// mean) is subtracted before the region test.
EvalReport evaluate(const Eigen::Ref<const Vector>& predictions, const Eigen::Ref<const Vector>& y,
                    const Eigen::Ref<const Matrix>& z, const OutlierRegion& region,
                    const Eigen::Ref<const Vector>& z_center);

using PredictFn = std::function<double(const Vector& x, const Vector& z)>;

EvalReport evaluate(const PredictFn& predict_fn, const Eigen::Ref<const Matrix>& x,
                    const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Vector>& y,
                    const OutlierRegion& region, const Eigen::Ref<const Vector>& z_center);

/// 100 * (variant - baseline) / baseline, or nullopt if either side is absent.
std::optional<double> delta_percent(const std::optional<double>& variant,
                                    const std::optional<double>& baseline);

struct CurvePoint {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  std::optional<double> mse;
  Index count = 0;
};

/// Mean squared error per z bin; edges must be strictly increasing. Rows
/// outside [edges.front(), edges.back()) are ignored, except that the last
/// bin is closed on the right. Requires a single z column.
std::vector<CurvePoint> conditional_mse_curve(const Eigen::Ref<const Vector>& predictions,
                                              const Eigen::Ref<const Vector>& y,
                                              const Eigen::Ref<const Matrix>& z,
                                              const std::vector<double>& edges);

/// Excess MSE of w over the oracle, split as
///   ||Gamma (a - w) + b||^2_{E[zz^T]} + ||a - w||^2_{E[x~ x~^T]},
/// with Gamma = E[zz^T]^{-1} E[zx^T] and x~ = x - Gamma^T z.
struct ExcessMseCheck {
  double lhs = 0.0;     // MSE(w) - MSE_star
  double term_z = 0.0;  // first term, zero on the conservative set
  double term_x = 0.0;
  double rhs = 0.0;
  Matrix gamma;         // q x d
  Matrix resid_moment;  // d x d, E[x~ x~^T]
  Vector constraint;    // Gamma (a - w) + b
  double mse_star = 0.0;
};

ExcessMseCheck excess_mse_check(const SecondMoments& population, const Eigen::Ref<const Vector>& w);

enum class ProcessKind { linear, poly };
/// Feature pipeline for the poly process: `linear` predicts from x with z
/// missing, `quadratic` predicts from phi(x) with psi(z) missing.
enum class FeaturePipeline { linear, quadratic };

struct ExperimentConfig {
  ProcessKind process = ProcessKind::linear;
  SyntheticConfig linear;  // n and seed are overridden per run
  PolyConfig poly;
  FeaturePipeline pipeline = FeaturePipeline::linear;
  Index n_train = 100;
  Index n_test = 100000;
  Index n_runs = 50;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<double> curve_edges;  // empty: no curves
};

inline constexpr std::array<const char*, 4> kPredictorNames = {"optimistic", "conservative",
                                                                "robust", "oracle"};

struct RunRecord {
  Index run = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t test_seed = 0;
  bool ok = false;
  std::string error;
  std::array<EvalReport, 4> reports;  // order of kPredictorNames
  double gate_b0 = 0.0;
  double gate_b1 = 0.0;
  std::vector<std::array<CurvePoint, 4>> curve;  // per bin, per predictor
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Type-7 (linear interpolation) quartiles. Empty input yields NaNs.
Quartiles quartiles(std::vector<double> values);

struct DeltaRow {
  std::string predictor;
  double mean_in = 0.0;  // mean over runs of Delta MSE_{1-alpha} in percent
  double mean_out = 0.0;
  // Delta of the run-averaged MSEs, i.e. 100 * (avg MSE_variant / avg MSE_baseline - 1)
  double pooled_in = 0.0;
  double pooled_out = 0.0;
  Quartiles in;
  Quartiles out;
  Index runs_used = 0;
};

struct CurveSummary {
  std::string predictor;
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  std::optional<double> mean_mse;  // across runs with data in the bin
  Quartiles spread;
  Index total_count = 0;
};

/// Delta rows (optimistic baseline, conservative, robust), per-run records,
/// and curves aggregated across successful runs.
struct DeltaTable {
  std::vector<DeltaRow> rows;
  std::vector<RunRecord> runs;
  Index n_failed = 0;
  std::vector<CurveSummary> curves;
};

/// One run: fresh train/test draws from derive_seed(seed, run, 0/1), fit all
/// predictors on train, score on test.
RunRecord run_single(const ExperimentConfig& cfg, Index run);

/// Runs are independent and may execute on cfg.threads workers; results are
/// merged by run index, so output is identical for any thread count.
DeltaTable run_mc_experiment(const ExperimentConfig& cfg);

/// Aggregation step of run_mc_experiment, exposed for recomputation checks.
DeltaTable summarize_runs(std::vector<RunRecord> runs);

}  // namespace robustpred
