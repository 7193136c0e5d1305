#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robustpred/datagen.hpp"
#include "robustpred/errors.hpp"
#include "robustpred/evalkit.hpp"
#include "robustpred/model_io.hpp"
#include "robustpred/robust.hpp"

namespace py = pybind11;
using namespace robustpred;

namespace {

SyntheticConfig linear_config(double rho, double nu_z, double nu_u, Index n, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.rho = rho;
  cfg.nu_z = nu_z;
  cfg.nu_u = nu_u;
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["mse"] = r.mse;
  d["mse_in"] = r.mse_in;
  d["mse_out"] = r.mse_out;
  d["n_in"] = r.n_in;
  d["n_out"] = r.n_out;
  d["alpha"] = r.alpha;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust prediction with missing features";

  auto base = py::register_exception<Error>(m, "Error");
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<SingleClassError>(m, "SingleClassError", validation.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<VersionError>(m, "VersionError", format.ptr());

  py::class_<RobustModel>(m, "RobustModel")
      .def_property_readonly("alpha", &RobustModel::alpha)
      .def_property_readonly("d", &RobustModel::d)
      .def_property_readonly("q", &RobustModel::q)
      .def_property_readonly("w_optimistic", [](const RobustModel& r) { return r.optimistic.weights; })
      .def_property_readonly("w_conservative", [](const RobustModel& r) { return r.conservative.weights; })
      .def_property_readonly("imputer", [](const RobustModel& r) { return r.imputer.gmat; })
      .def_property_readonly("gate", [](const RobustModel& r) {
        py::dict d;
        d["b0"] = r.gate.b0;
        d["b1"] = r.gate.b1;
        d["kappa"] = r.gate.kappa();
        d["delta0"] = r.gate.delta0();
        d["converged"] = r.gate.diagnostics.converged;
        return d;
      })
      .def_property_readonly("n_outliers", [](const RobustModel& r) { return r.info.n_outliers; })
      .def("predict", [](const RobustModel& r, const Matrix& x) { return predict_robust_rows(r, x).prediction; },
           py::arg("x"))
      .def("predict_all", [](const RobustModel& r, const Matrix& x) {
             const RobustBatch b = predict_robust_rows(r, x);
             py::dict d;
             d["prediction"] = b.prediction;
             d["optimistic"] = b.optimistic;
             d["conservative"] = b.conservative;
             d["p_outlier"] = b.p_outlier;
             d["delta"] = b.delta;
             return d;
           },
           py::arg("x"))
      .def("adaptive_weights", [](const RobustModel& r, const Vector& x) { return adaptive_weights(r, x); },
           py::arg("x"))
      .def("to_json", [](const RobustModel& r) {
        ModelFile f;
        f.model = r;
        for (Index j = 0; j < r.d(); ++j) f.schema.roles.x_cols.push_back("x" + std::to_string(j + 1));
        for (Index j = 0; j < r.q(); ++j) f.schema.roles.z_cols.push_back("z" + std::to_string(j + 1));
        f.schema.roles.y_col = "y";
        return serialize_model(f);
      })
      .def_static("from_json", [](const std::string& text) { return deserialize_model(text).model; },
                  py::arg("text"));

  m.def("fit", &fit_robust, py::arg("x"), py::arg("z"), py::arg("y"), py::arg("alpha") = 0.1,
        "Fit the robust predictor on raw training data.");

  m.def("generate_linear",
        [](Index n, double rho, double nu_z, double nu_u, std::uint64_t seed) {
          const SyntheticData s = generate_linear(linear_config(rho, nu_z, nu_u, n, seed));
          return py::make_tuple(s.x, s.z, s.y);
        },
        py::arg("n"), py::arg("rho") = 0.7, py::arg("nu_z") = 3.0, py::arg("nu_u") = 3.0, py::arg("seed") = 1);

  m.def("generate_poly",
        [](Index n, double w1, std::uint64_t seed) {
          PolyConfig cfg;
          cfg.base.n = n;
          cfg.base.seed = seed;
          cfg.wz(1) = w1;
          const SyntheticData s = generate_poly(cfg);
          return py::make_tuple(s.x, s.z, s.y);
        },
        py::arg("n"), py::arg("w1") = 0.1, py::arg("seed") = 1);

  m.def("feature_map_quadratic", [](const Matrix& x) { return feature_map_quadratic(x); }, py::arg("x"));

  m.def("evaluate",
        [](const RobustModel& model, const Vector& predictions, const Vector& y, const Matrix& z) {
          return report_dict(evaluate(predictions, y, z, model.region, model.centering.z_mean));
        },
        py::arg("model"), py::arg("predictions"), py::arg("y"), py::arg("z"),
        "MSE overall and split by the model's tail region on z.");

  m.def("run_experiment",
        [](Index runs, Index n_train, Index n_test, double rho, double alpha, std::uint64_t seed, unsigned threads) {
          ExperimentConfig cfg;
          cfg.linear.rho = rho;
          cfg.n_runs = runs;
          cfg.n_train = n_train;
          cfg.n_test = n_test;
          cfg.alpha = alpha;
          cfg.seed = seed;
          cfg.threads = threads;
          DeltaTable t;
          {
            py::gil_scoped_release release;
            t = run_mc_experiment(cfg);
          }
          py::dict out;
          for (const auto& r : t.rows) {
            py::dict d;
            d["mean_in"] = r.mean_in;
            d["mean_out"] = r.mean_out;
            d["pooled_in"] = r.pooled_in;
            d["pooled_out"] = r.pooled_out;
            d["runs_used"] = r.runs_used;
            out[py::str(r.predictor)] = d;
          }
          out["n_failed"] = t.n_failed;
          return out;
        },
        py::arg("runs") = 50, py::arg("n_train") = 100, py::arg("n_test") = 100000, py::arg("rho") = 0.7,
        py::arg("alpha") = 0.1, py::arg("seed") = 1, py::arg("threads") = 1);
}
