#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "robustpred/dataio.hpp"
#include "robustpred/datagen.hpp"
#include "robustpred/errors.hpp"
#include "robustpred/evalkit.hpp"
#include "robustpred/model_io.hpp"
#include "robustpred/robust.hpp"

namespace robustpred::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// option storage

struct ProcessOpts {
  std::string process = "linear";
  double rho = 0.7;
  std::optional<double> nu_z;
  std::optional<double> nu_u;
  std::string sigma_u = "identity";
  double noise_x_var = 0.01;
  double noise_y_var = 0.01;
  double w0 = 1.0;
  double w1 = 0.1;
  std::vector<double> wx = {1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
};

struct SplitOpts {
  std::optional<double> train_fraction;
  std::optional<std::string> split_date;
};

struct SchemaOpts {
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
  std::string y_col;
  std::optional<std::string> date_col;
  int lag = 0;
  std::string nox_col = "nox";
  std::string o3_col = "o3";
  std::string feature_map = "identity";
};

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  std::optional<double> alpha;

  // simulate / experiment
  ProcessOpts process;
  Index n = 1000;
  std::optional<Index> n_test;

  // fit / evaluate / predict
  std::string data;
  std::string model;
  std::string model_out;
  SchemaOpts schema;
  SplitOpts split;

  // experiment
  std::string pipeline = "linear";
  Index n_train = 100;
  Index exp_n_test = 100000;
  Index runs = 50;
  unsigned threads = 1;
  int curve_bins = 24;
  double curve_max = 12.0;
};

// ---------------------------------------------------------------------------
// config file handling

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + " is not key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::optional<std::string> find_flag_value(const std::vector<std::string>& args,
                                           const std::string& flag) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
  }
  return std::nullopt;
}

bool given_on_command_line(const std::vector<std::string>& args, const CLI::Option* opt) {
  for (const auto& name : opt->get_lnames()) {
    const std::string flag = "--" + name;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
  }
  return false;
}

// Splices config-file values in as --key=value tokens right after the
// subcommand name, for keys not given on the command line.
std::vector<std::string> with_config(CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty() || args[0].empty() || args[0][0] == '-') return args;
  const auto config = find_flag_value(args, "--config");
  if (!config) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::vector<std::string> injected;
  std::vector<std::string> unknown;
  for (const auto& [key, value] : read_config(*config)) {
    const CLI::Option* opt = nullptr;
    for (const CLI::Option* o : sub->get_options()) {
      const auto& names = o->get_lnames();
      if (std::find(names.begin(), names.end(), key) != names.end()) opt = o;
    }
    if (opt == nullptr || key == "config" || key == "help") {
      unknown.push_back(key);
      continue;
    }
    if (!given_on_command_line(args, opt)) injected.push_back("--" + key + "=" + value);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys for '" + args[0] + "':";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void write_effective_config(const CLI::App& sub, const fs::path& dir) {
  std::map<std::string, std::string> entries;
  for (const CLI::Option* o : sub.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string key = o->get_lnames().front();
    if (key == "help" || key == "config") continue;
    std::string value;
    if (o->count() > 0) {
      const auto& res = o->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = o->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
      }
    }
    if (!value.empty()) entries[key] = value;
  }
  fs::create_directories(dir);
  std::ofstream out(dir / "effective_config.txt");
  out << "# robustpred " << sub.get_name() << "\n";
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

// ---------------------------------------------------------------------------
// shared helpers

void add_common(CLI::App* sub, Options& o, bool alpha) {
  sub->add_option("--config", o.config, "flat key = value file; command-line flags win");
  sub->add_option("--seed", o.seed, "master random seed");
  sub->add_option("--out", o.out, "output directory");
  if (alpha) sub->add_option("--alpha", o.alpha, "tail-region level in (0, 1]");
}

void add_process(CLI::App* sub, ProcessOpts& p) {
  sub->add_option("--process", p.process, "linear | poly")
      ->check(CLI::IsMember({"linear", "poly"}));
  sub->add_option("--rho", p.rho, "loading of z on each x_j");
  sub->add_option("--nu-z", p.nu_z, "t degrees of freedom of z (default 3 linear, 5 poly)");
  sub->add_option("--nu-u", p.nu_u, "t degrees of freedom of u (default 3 linear, 5 poly)");
  sub->add_option("--sigma-u", p.sigma_u,
                  "u scale: identity | calibrated ((1-rho^2) I) | a number s for s I");
  sub->add_option("--noise-x-var", p.noise_x_var, "variance of eps_x");
  sub->add_option("--noise-y-var", p.noise_y_var, "variance of eps_y");
  sub->add_option("--w0", p.w0, "poly: weight on z");
  sub->add_option("--w1", p.w1, "poly: weight on z^2");
  sub->add_option("--wx", p.wx, "poly: 6 weights on [x, x^2]")->delimiter(',')->expected(6);
}

void add_schema(CLI::App* sub, SchemaOpts& s) {
  sub->add_option("--x-cols", s.x_cols, "observable feature columns")->delimiter(',');
  sub->add_option("--z-cols", s.z_cols, "columns missing at prediction time")->delimiter(',');
  sub->add_option("--y-col", s.y_col, "outcome column");
  sub->add_option("--date-col", s.date_col, "optional ISO-8601 date column");
  sub->add_option("--lag", s.lag, "build lagged daily features with L past days");
  sub->add_option("--nox-col", s.nox_col, "lag mode: series used for y and lagged x");
  sub->add_option("--o3-col", s.o3_col, "lag mode: series used for z and lagged x");
  sub->add_option("--feature-map", s.feature_map, "identity | quadratic")
      ->check(CLI::IsMember({"identity", "quadratic"}));
}

void add_split(CLI::App* sub, SplitOpts& s) {
  auto* f = sub->add_option("--train-fraction", s.train_fraction,
                            "chronological split: leading fraction used for training");
  auto* d = sub->add_option("--split-date", s.split_date,
                            "chronological split: rows dated before this go to training");
  f->excludes(d);
}

Matrix sigma_u_from(const ProcessOpts& p) {
  if (p.sigma_u == "identity") return Matrix::Identity(3, 3);
  if (p.sigma_u == "calibrated") return calibrated_sigma_u(p.rho);
  try {
    std::size_t used = 0;
    const double s = std::stod(p.sigma_u, &used);
    if (used != p.sigma_u.size()) throw std::invalid_argument("trailing");
    return s * Matrix::Identity(3, 3);
  } catch (const std::exception&) {
    throw ValidationError("--sigma-u must be identity, calibrated, or a number");
  }
}

SyntheticConfig linear_config(const ProcessOpts& p) {
  SyntheticConfig c;
  c.rho = p.rho;
  c.nu_z = p.nu_z.value_or(3.0);
  c.nu_u = p.nu_u.value_or(3.0);
  c.sigma_u = sigma_u_from(p);
  c.noise_x_var = p.noise_x_var;
  c.noise_y_var = p.noise_y_var;
  return c;
}

PolyConfig poly_config(const ProcessOpts& p) {
  PolyConfig c;
  c.base = linear_config(p);
  c.base.nu_z = p.nu_z.value_or(5.0);
  c.base.nu_u = p.nu_u.value_or(5.0);
  c.wz = Eigen::Vector2d(p.w0, p.w1);
  c.wx = Eigen::Map<const Vector>(p.wx.data(), static_cast<Index>(p.wx.size()));
  return c;
}

double alpha_or_default(const Options& o, double fallback) {
  const double a = o.alpha.value_or(fallback);
  if (!(a > 0.0 && a <= 1.0)) throw ValidationError("--alpha must lie in (0, 1]");
  return a;
}

FeatureSchema schema_from(const SchemaOpts& s) {
  FeatureSchema f;
  f.feature_map = s.feature_map == "quadratic" ? FeatureMap::quadratic : FeatureMap::identity;
  if (s.lag > 0) {
    f.kind = FeatureSchema::Kind::lag;
    f.lag.lags = s.lag;
    f.lag.nox_column = s.nox_col;
    f.lag.o3_column = s.o3_col;
    f.lag.date_column = s.date_col;
    return f;
  }
  if (s.x_cols.empty() || s.z_cols.empty() || s.y_col.empty()) {
    throw ValidationError("give --x-cols, --z-cols and --y-col, or --lag L for lagged series");
  }
  f.kind = FeatureSchema::Kind::columns;
  f.roles = {s.x_cols, s.z_cols, s.y_col, s.date_col};
  return f;
}

enum class Side { train, test };

Dataset apply_split(Dataset d, const SplitOpts& s, Side side) {
  if (s.train_fraction) {
    auto parts = split_chronological(d, *s.train_fraction);
    return side == Side::train ? std::move(parts.first) : std::move(parts.second);
  }
  if (s.split_date) {
    auto parts = split_by_date(d, *s.split_date);
    return side == Side::train ? std::move(parts.first) : std::move(parts.second);
  }
  return d;
}

Column numeric_column(const std::string& name, const Eigen::Ref<const Vector>& v) {
  Column c;
  c.name = name;
  c.values.reserve(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) c.values.emplace_back(v(i));
  return c;
}

Column text_column(const std::string& name, std::vector<std::string> values) {
  Column c;
  c.name = name;
  c.numeric = false;
  c.text = std::move(values);
  return c;
}

Table synthetic_table(const SyntheticData& s, bool poly) {
  Table t;
  for (Index j = 0; j < s.x.cols(); ++j) t.columns.push_back(numeric_column("x" + std::to_string(j + 1), s.x.col(j)));
  if (poly) {
    t.columns.push_back(numeric_column("psi1", s.z.col(0)));
    t.columns.push_back(numeric_column("psi2", s.z.col(1)));
  } else {
    t.columns.push_back(numeric_column("z", s.z.col(0)));
  }
  t.columns.push_back(numeric_column("y", s.y));
  return t;
}

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw ValidationError("--out DIR is required");
  fs::create_directories(o.out);
  return fs::path(o.out);
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_simulate(const Options& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = require_out(o);
  const bool poly = o.process.process == "poly";
  const Index n_test = o.n_test.value_or(o.n);
  if (o.n < 1 || n_test < 1) throw ValidationError("--n and --n-test must be positive");
  auto draw = [&](Index n, std::uint64_t seed) {
    if (poly) {
      PolyConfig c = poly_config(o.process);
      c.base.n = n;
      c.base.seed = seed;
      return generate_poly(c);
    }
    SyntheticConfig c = linear_config(o.process);
    c.n = n;
    c.seed = seed;
    return generate_linear(c);
  };
  const SyntheticData train = draw(o.n, derive_seed(o.seed, 0, 0));
  const SyntheticData test = draw(n_test, derive_seed(o.seed, 0, 1));
  write_csv(dir / "train.csv", synthetic_table(train, poly));
  write_csv(dir / "test.csv", synthetic_table(test, poly));
  write_effective_config(sub, dir);
  out << "wrote " << o.n << " training and " << n_test << " test rows to " << dir.string() << "\n";
  return kOk;
}

int cmd_fit(const Options& o, const CLI::App& sub, std::ostream& out) {
  const FeatureSchema schema = schema_from(o.schema);
  const double alpha = alpha_or_default(o, 0.1);
  if (o.data.empty()) throw ValidationError("--data CSV is required");
  if (o.out.empty() && o.model_out.empty()) throw ValidationError("give --out DIR or --model-out FILE");

  const Table table = read_csv(o.data, csv_schema_for(schema));
  const Dataset full = dataset_from_table(table, schema);
  const Dataset train = apply_split(full, o.split, Side::train);
  const RobustModel model = fit_robust(train.x, train.z, train.y, alpha);

  fs::path model_path = o.model_out.empty() ? fs::path(o.out) / "model.json" : fs::path(o.model_out);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_model({model, schema}, model_path);

  std::ostringstream rep;
  const auto& g = model.gate;
  rep << "n = " << model.info.n << "\n"
      << "d = " << model.d() << "\n"
      << "q = " << model.q() << "\n"
      << "alpha = " << format_double(alpha) << "\n"
      << "dropped_rows = " << full.dropped_rows << "\n"
      << "n_outliers = " << model.info.n_outliers << "\n"
      << "n_inliers = " << model.info.n_inliers << "\n"
      << "gate_b0 = " << format_double(g.b0) << "\n"
      << "gate_b1 = " << format_double(g.b1) << "\n"
      << "gate_kappa = " << (g.kappa() ? format_double(*g.kappa()) : "undefined") << "\n"
      << "gate_delta0 = " << (g.delta0() ? format_double(*g.delta0()) : "undefined") << "\n"
      << "gate_cross_entropy = " << format_double(g.diagnostics.cross_entropy) << "\n"
      << "gate_iterations = " << g.diagnostics.iterations << "\n"
      << "gate_converged = " << (g.diagnostics.converged ? "true" : "false") << "\n"
      << "gate_capped = " << (g.diagnostics.capped ? "true" : "false") << "\n"
      << "constraint_residual = " << format_double(model.conservative.constraint_residual) << "\n"
      << "constraint_infeasible = " << (model.conservative.constraint_infeasible ? "true" : "false")
      << "\n"
      << "model = " << model_path.string() << "\n";
  for (const auto& w : model.info.warnings) rep << "warning = " << w << "\n";
  out << rep.str();
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "fit_report.txt") << rep.str();
    write_effective_config(sub, o.out);
  }
  return kOk;
}

void check_dims(const Dataset& d, const RobustModel& m) {
  if (d.x.cols() != m.d() || d.z.cols() != m.q()) {
    std::ostringstream msg;
    msg << "data has d = " << d.x.cols() << ", q = " << d.z.cols() << " but the model expects d = "
        << m.d() << ", q = " << m.q();
    throw ShapeError(msg.str());
  }
}

int cmd_evaluate(const Options& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = require_out(o);
  if (o.model.empty() || o.data.empty()) throw ValidationError("--model and --data are required");
  const ModelFile mf = load_model(o.model);
  const RobustModel& m = mf.model;
  const Table table = read_csv(o.data, csv_schema_for(mf.schema));
  const Dataset test = apply_split(dataset_from_table(table, mf.schema), o.split, Side::test);
  check_dims(test, m);

  OutlierRegion region = m.region;
  region.alpha = alpha_or_default(o, m.region.alpha);
  const RobustBatch batch = predict_robust_rows(m, test.x);
  const std::array<const Vector*, 3> preds = {&batch.optimistic, &batch.conservative,
                                              &batch.prediction};
  std::array<EvalReport, 3> reports;
  for (std::size_t k = 0; k < 3; ++k) {
    reports[k] = evaluate(*preds[k], test.y, test.z, region, m.centering.z_mean);
  }

  std::ofstream csv(dir / "report.csv");
  csv << "predictor,n,n_in,n_out,mse,mse_in,mse_out,delta_mse_in_pct,delta_mse_out_pct\n";
  for (std::size_t k = 0; k < 3; ++k) {
    const EvalReport& r = reports[k];
    csv << kPredictorNames[k] << ',' << (r.n_in + r.n_out) << ',' << r.n_in << ',' << r.n_out << ','
        << format_double(r.mse) << ',' << opt_num(r.mse_in) << ',' << opt_num(r.mse_out) << ','
        << opt_num(delta_percent(r.mse_in, reports[0].mse_in)) << ','
        << opt_num(delta_percent(r.mse_out, reports[0].mse_out)) << '\n';
  }
  write_effective_config(sub, dir);

  out << "alpha = " << region.alpha << ", test rows = " << test.n() << " (" << reports[0].n_out
      << " outliers)\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %14s %14s\n", "predictor", "dMSE_in(%)", "dMSE_out(%)");
  out << line;
  for (std::size_t k = 1; k < 3; ++k) {
    const auto din = delta_percent(reports[k].mse_in, reports[0].mse_in);
    const auto dout = delta_percent(reports[k].mse_out, reports[0].mse_out);
    std::snprintf(line, sizeof line, "%-14s %+14.2f %+14.2f\n", kPredictorNames[k],
                  din.value_or(NAN), dout.value_or(NAN));
    out << line;
  }
  return kOk;
}

int cmd_predict(const Options& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = require_out(o);
  if (o.model.empty() || o.data.empty()) throw ValidationError("--model and --data are required");
  const ModelFile mf = load_model(o.model);
  const RobustModel& m = mf.model;
  const Table table = read_csv(o.data, csv_schema_for(mf.schema));

  Matrix x;
  std::vector<Index> rows;
  std::optional<std::string> date_col;
  if (mf.schema.kind == FeatureSchema::Kind::lag) {
    x = build_lag_features(table, mf.schema.lag, rows);
    date_col = mf.schema.lag.date_column;
  } else {
    std::vector<const Column*> cols;
    for (const auto& name : mf.schema.roles.x_cols) cols.push_back(&table.column(name));
    date_col = mf.schema.roles.date_col;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      if (std::all_of(cols.begin(), cols.end(), [&](const Column* c) { return c->values[i].has_value(); })) {
        rows.push_back(static_cast<Index>(i));
      }
    }
    x.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < cols.size(); ++j)
        x(static_cast<Index>(r), static_cast<Index>(j)) = *cols[j]->values[static_cast<std::size_t>(rows[r])];
  }
  if (mf.schema.feature_map == FeatureMap::quadratic) x = feature_map_quadratic(x);
  if (x.cols() != m.d()) throw ShapeError("feature columns do not match the model dimension");

  const RobustBatch batch = predict_robust_rows(m, x);
  Table t;
  Vector row_index(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) row_index(static_cast<Index>(r)) = static_cast<double>(rows[r]);
  t.columns.push_back(numeric_column("row", row_index));
  if (date_col) {
    const Column& dc = table.column(*date_col);
    std::vector<std::string> dates;
    for (Index r : rows) {
      dates.push_back(static_cast<std::size_t>(r) < dc.text.size() ? dc.text[static_cast<std::size_t>(r)] : "");
    }
    t.columns.push_back(text_column("date", std::move(dates)));
  }
  t.columns.push_back(numeric_column("prediction", batch.prediction));
  t.columns.push_back(numeric_column("p_outlier", batch.p_outlier));
  t.columns.push_back(numeric_column("delta", batch.delta));
  t.columns.push_back(numeric_column("optimistic", batch.optimistic));
  t.columns.push_back(numeric_column("conservative", batch.conservative));
  write_csv(dir / "predictions.csv", t);
  write_effective_config(sub, dir);
  out << "wrote " << rows.size() << " predictions to " << (dir / "predictions.csv").string() << "\n";
  return kOk;
}

void write_delta_table(const DeltaTable& table, const fs::path& path) {
  std::ofstream f(path);
  f << "predictor,runs_used,mean_delta_mse_in_pct,mean_delta_mse_out_pct,"
       "pooled_delta_mse_in_pct,pooled_delta_mse_out_pct,"
       "q1_in,median_in,q3_in,q1_out,median_out,q3_out\n";
  for (const auto& r : table.rows) {
    f << r.predictor << ',' << r.runs_used << ',' << format_double(r.mean_in) << ','
      << format_double(r.mean_out) << ',' << format_double(r.pooled_in) << ','
      << format_double(r.pooled_out) << ',' << format_double(r.in.q1) << ','
      << format_double(r.in.median) << ',' << format_double(r.in.q3) << ','
      << format_double(r.out.q1) << ',' << format_double(r.out.median) << ','
      << format_double(r.out.q3) << '\n';
  }
}

void write_runs(const DeltaTable& table, const fs::path& path) {
  std::ofstream f(path);
  f << "run,train_seed,test_seed,ok,gate_b0,gate_b1";
  for (const char* p : kPredictorNames) {
    f << ',' << p << "_mse," << p << "_mse_in," << p << "_mse_out";
  }
  f << ",n_in,n_out,error\n";
  for (const auto& r : table.runs) {
    f << r.run << ',' << r.train_seed << ',' << r.test_seed << ',' << (r.ok ? 1 : 0) << ','
      << (r.ok ? format_double(r.gate_b0) : "") << ',' << (r.ok ? format_double(r.gate_b1) : "");
    for (const auto& rep : r.reports) {
      f << ',' << (r.ok ? format_double(rep.mse) : "") << ',' << opt_num(rep.mse_in) << ','
        << opt_num(rep.mse_out);
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    f << ',' << r.reports[0].n_in << ',' << r.reports[0].n_out << ',' << err << '\n';
  }
}

void write_curves(const DeltaTable& table, const fs::path& path) {
  std::ofstream f(path);
  f << "predictor,bin_lo,bin_hi,bin_center,mean_mse,q1_mse,median_mse,q3_mse,count\n";
  for (const auto& c : table.curves) {
    f << c.predictor << ',' << format_double(c.lo) << ',' << format_double(c.hi) << ','
      << format_double(c.center) << ',' << opt_num(c.mean_mse) << ',';
    if (c.mean_mse) {
      f << format_double(c.spread.q1) << ',' << format_double(c.spread.median) << ','
        << format_double(c.spread.q3);
    } else {
      f << ",,";
    }
    f << ',' << c.total_count << '\n';
  }
}

std::string summary_text(const DeltaTable& table, const ExperimentConfig& cfg) {
  std::ostringstream s;
  char line[160];
  s << "Changes in averaged MSE relative to the optimistic predictor\n";
  std::snprintf(line, sizeof line, "alpha = %g, n_train = %lld, n_test = %lld, runs = %lld (failed %lld)\n",
                cfg.alpha, static_cast<long long>(cfg.n_train), static_cast<long long>(cfg.n_test),
                static_cast<long long>(cfg.n_runs), static_cast<long long>(table.n_failed));
  s << line;
  std::snprintf(line, sizeof line, "%-14s %14s %14s %16s %16s\n", "predictor", "dMSE_in(%)",
                "dMSE_out(%)", "pooled_in(%)", "pooled_out(%)");
  s << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%-14s %+14.1f %+14.1f %+16.1f %+16.1f\n",
                  r.predictor.c_str(), r.mean_in, r.mean_out, r.pooled_in, r.pooled_out);
    s << line;
  }
  s << "dMSE: mean over runs of the per-run change; pooled: change of the run-averaged MSE\n";
  return s.str();
}

int cmd_experiment(const Options& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = require_out(o);
  ExperimentConfig cfg;
  cfg.process = o.process.process == "poly" ? ProcessKind::poly : ProcessKind::linear;
  cfg.linear = linear_config(o.process);
  if (cfg.process == ProcessKind::poly) cfg.poly = poly_config(o.process);
  cfg.pipeline = o.pipeline == "quadratic" ? FeaturePipeline::quadratic : FeaturePipeline::linear;
  if (cfg.process == ProcessKind::linear && cfg.pipeline == FeaturePipeline::quadratic) {
    throw ValidationError("--pipeline quadratic requires --process poly");
  }
  cfg.n_train = o.n_train;
  cfg.n_test = o.exp_n_test;
  cfg.n_runs = o.runs;
  cfg.alpha = alpha_or_default(o, 0.1);
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  if (o.curve_bins > 0) {
    if (!(o.curve_max > 0.0)) throw ValidationError("--curve-max must be positive");
    for (int b = 0; b <= o.curve_bins; ++b) {
      cfg.curve_edges.push_back(-o.curve_max + 2.0 * o.curve_max * b / o.curve_bins);
    }
  }

  const DeltaTable table = run_mc_experiment(cfg);
  write_delta_table(table, dir / "delta_table.csv");
  write_runs(table, dir / "runs.csv");
  if (!table.curves.empty()) write_curves(table, dir / "curves.csv");
  const std::string summary = summary_text(table, cfg);
  std::ofstream(dir / "summary.txt") << summary;
  write_effective_config(sub, dir);
  out << summary;
  return table.n_failed == cfg.n_runs ? kValidation : kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust linear prediction when features are missing at test time", "robustpred"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto* sim = app.add_subcommand("simulate", "draw synthetic train/test CSV files");
  add_common(sim, o, false);
  add_process(sim, o.process);
  sim->add_option("--n", o.n, "training rows");
  sim->add_option("--n-test", o.n_test, "test rows (default: same as --n)");

  auto* fit = app.add_subcommand("fit", "learn the robust predictor from a CSV");
  add_common(fit, o, true);
  fit->add_option("--data,--train", o.data, "training CSV");
  fit->add_option("--model-out", o.model_out, "model file (default OUT/model.json)");
  add_schema(fit, o.schema);
  add_split(fit, o.split);

  auto* pred = app.add_subcommand("predict", "predict from features with a fitted model");
  add_common(pred, o, false);
  pred->add_option("--model", o.model, "model file")->required();
  pred->add_option("--data", o.data, "feature CSV")->required();

  auto* eval = app.add_subcommand("evaluate", "outlier/inlier MSE report on test data");
  add_common(eval, o, true);
  eval->add_option("--model", o.model, "model file")->required();
  eval->add_option("--data,--test", o.data, "test CSV")->required();
  add_split(eval, o.split);

  auto* exp = app.add_subcommand("experiment", "Monte Carlo comparison of the three predictors");
  add_common(exp, o, true);
  add_process(exp, o.process);
  exp->add_option("--pipeline", o.pipeline, "poly only: linear | quadratic feature pipeline")
      ->check(CLI::IsMember({"linear", "quadratic"}));
  exp->add_option("--n-train", o.n_train, "training rows per run");
  exp->add_option("--n-test", o.exp_n_test, "test rows per run");
  exp->add_option("--runs", o.runs, "Monte Carlo runs");
  exp->add_option("--threads", o.threads, "worker threads (output does not depend on it)");
  exp->add_option("--curve-bins", o.curve_bins, "z bins for conditional MSE curves (0 disables)");
  exp->add_option("--curve-max", o.curve_max, "curves cover z in [-max, max]");

  try {
    std::vector<std::string> argv = with_config(app, args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    if (*sim) return cmd_simulate(o, *sim, out);
    if (*fit) return cmd_fit(o, *fit, out);
    if (*pred) return cmd_predict(o, *pred, out);
    if (*eval) return cmd_evaluate(o, *eval, out);
    if (*exp) return cmd_experiment(o, *exp, out);
  } catch (const SingleClassError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kInternal;
}

}  // namespace robustpred::cli
