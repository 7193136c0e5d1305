#include "robustpred/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "robustpred/errors.hpp"

namespace robustpred {

using json = nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector row = m.row(i).transpose();
    rows.push_back(to_json(row));
  }
  return rows;
}

Vector vector_from(const json& j, Index expected, const char* key) {
  if (!j.is_array() || static_cast<Index>(j.size()) != expected) {
    std::ostringstream msg;
    msg << "model field '" << key << "' must be an array of " << expected << " numbers";
    throw FormatError(msg.str());
  }
  Vector v(expected);
  for (Index i = 0; i < expected; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Matrix matrix_from(const json& j, Index rows, Index cols, const char* key) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    std::ostringstream msg;
    msg << "model field '" << key << "' must have " << rows << " rows";
    throw FormatError(msg.str());
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = vector_from(j[static_cast<std::size_t>(i)], cols, key);
  return m;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

const char* to_string(FeatureMap f) { return f == FeatureMap::quadratic ? "quadratic" : "identity"; }

FeatureMap feature_map_from(const std::string& s) {
  if (s == "identity") return FeatureMap::identity;
  if (s == "quadratic") return FeatureMap::quadratic;
  throw FormatError("unknown feature map '" + s + "'");
}

json schema_json(const FeatureSchema& s) {
  json j;
  j["feature_map"] = to_string(s.feature_map);
  if (s.kind == FeatureSchema::Kind::lag) {
    j["kind"] = "lag";
    j["lag"] = s.lag.lags;
    j["nox_col"] = s.lag.nox_column;
    j["o3_col"] = s.lag.o3_column;
    j["date_col"] = s.lag.date_column ? json(*s.lag.date_column) : json(nullptr);
  } else {
    j["kind"] = "columns";
    j["x_cols"] = s.roles.x_cols;
    j["z_cols"] = s.roles.z_cols;
    j["y_col"] = s.roles.y_col;
    j["date_col"] = s.roles.date_col ? json(*s.roles.date_col) : json(nullptr);
  }
  return j;
}

FeatureSchema schema_from(const json& j) {
  FeatureSchema s;
  s.feature_map = feature_map_from(j.at("feature_map").get<std::string>());
  const auto kind = j.at("kind").get<std::string>();
  std::optional<std::string> date;
  if (!j.at("date_col").is_null()) date = j.at("date_col").get<std::string>();
  if (kind == "lag") {
    s.kind = FeatureSchema::Kind::lag;
    s.lag.lags = j.at("lag").get<int>();
    s.lag.nox_column = j.at("nox_col").get<std::string>();
    s.lag.o3_column = j.at("o3_col").get<std::string>();
    s.lag.date_column = date;
  } else if (kind == "columns") {
    s.kind = FeatureSchema::Kind::columns;
    s.roles.x_cols = j.at("x_cols").get<std::vector<std::string>>();
    s.roles.z_cols = j.at("z_cols").get<std::vector<std::string>>();
    s.roles.y_col = j.at("y_col").get<std::string>();
    s.roles.date_col = date;
  } else {
    throw FormatError("unknown feature schema kind '" + kind + "'");
  }
  return s;
}

}  // namespace

std::string serialize_model(const ModelFile& file) {
  const RobustModel& m = file.model;
  json j;
  j["format"] = "robustpred-model";
  j["version"] = kModelFormatVersion;
  j["alpha"] = m.region.alpha;
  j["d"] = m.d();
  j["q"] = m.q();
  j["means"] = {{"x", to_json(m.centering.x_mean)},
                {"z", to_json(m.centering.z_mean)},
                {"y", m.centering.y_mean}};
  j["w_opt"] = to_json(m.optimistic.weights);
  j["w_con"] = to_json(m.conservative.weights);
  j["gmat"] = to_json(m.imputer.gmat);
  j["minv"] = to_json(m.region.minv);
  j["gate"] = {{"b0", m.gate.b0},
               {"b1", m.gate.b1},
               {"kappa", optional_number(m.gate.kappa())},
               {"delta0", optional_number(m.gate.delta0())},
               {"cross_entropy", m.gate.diagnostics.cross_entropy},
               {"iterations", m.gate.diagnostics.iterations},
               {"converged", m.gate.diagnostics.converged},
               {"capped", m.gate.diagnostics.capped}};
  j["conservative"] = {{"constraint_residual", m.conservative.constraint_residual},
                       {"constraint_infeasible", m.conservative.constraint_infeasible}};
  j["training"] = {{"n", m.info.n},
                   {"n_outliers", m.info.n_outliers},
                   {"n_inliers", m.info.n_inliers},
                   {"warnings", m.info.warnings}};
  j["features"] = schema_json(file.schema);
  return j.dump(2) + "\n";
}

ModelFile deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "robustpred-model") {
      throw FormatError("not a robustpred model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      std::ostringstream msg;
      msg << "model file has format version " << version << ", this build reads version "
          << kModelFormatVersion;
      throw VersionError(msg.str());
    }
    const auto d = j.at("d").get<Index>();
    const auto q = j.at("q").get<Index>();
    if (d < 1 || q < 0) throw FormatError("model dimensions are invalid");

    ModelFile f;
    RobustModel& m = f.model;
    m.centering.x_mean = vector_from(j.at("means").at("x"), d, "means.x");
    m.centering.z_mean = vector_from(j.at("means").at("z"), q, "means.z");
    m.centering.y_mean = j.at("means").at("y").get<double>();

    m.optimistic.weights = vector_from(j.at("w_opt"), d, "w_opt");
    m.optimistic.kind = PredictorKind::optimistic;
    m.optimistic.centering = m.centering;
    m.conservative.weights = vector_from(j.at("w_con"), d, "w_con");
    m.conservative.kind = PredictorKind::conservative;
    m.conservative.centering = m.centering;
    m.conservative.constraint_residual =
        j.at("conservative").at("constraint_residual").get<double>();
    m.conservative.constraint_infeasible =
        j.at("conservative").at("constraint_infeasible").get<bool>();

    m.imputer.gmat = matrix_from(j.at("gmat"), q, d, "gmat");
    m.region.minv = matrix_from(j.at("minv"), q, q, "minv");
    m.region.alpha = j.at("alpha").get<double>();
    if (!(m.region.alpha > 0.0 && m.region.alpha <= 1.0)) throw FormatError("alpha out of range");

    const json& g = j.at("gate");
    m.gate.b0 = g.at("b0").get<double>();
    m.gate.b1 = g.at("b1").get<double>();
    m.gate.diagnostics.cross_entropy = g.at("cross_entropy").get<double>();
    m.gate.diagnostics.iterations = g.at("iterations").get<int>();
    m.gate.diagnostics.converged = g.at("converged").get<bool>();
    m.gate.diagnostics.capped = g.at("capped").get<bool>();

    const json& t = j.at("training");
    m.info.n = t.at("n").get<Index>();
    m.info.n_outliers = t.at("n_outliers").get<Index>();
    m.info.n_inliers = t.at("n_inliers").get<Index>();
    m.info.warnings = t.at("warnings").get<std::vector<std::string>>();

    f.schema = schema_from(j.at("features"));
    return f;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file is missing or has malformed fields: ") + e.what());
  }
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  const std::string text = serialize_model(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace robustpred
