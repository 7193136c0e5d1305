#include "robustpred/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "robustpred/datagen.hpp"
#include "robustpred/errors.hpp"

namespace robustpred {

bool Table::has(const std::string& name) const {
  return std::any_of(columns.begin(), columns.end(),
                     [&](const Column& c) { return c.name == name; });
}

const Column& Table::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  std::ostringstream msg;
  msg << "column '" << name << "' not found; available:";
  for (const auto& c : columns) msg << ' ' << c.name;
  throw ValidationError(msg.str());
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool is_gap(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

}  // namespace

Table parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV input is empty; a header row is required");
  Table table;
  for (auto& name : split_line(line)) {
    Column c;
    c.name = name;
    c.numeric = std::find(schema.text_columns.begin(), schema.text_columns.end(), name) ==
                schema.text_columns.end();
    table.columns.push_back(std::move(c));
  }
  for (const auto& wanted : schema.text_columns) table.column(wanted);

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << "row " << row << " has " << cells.size() << " columns, expected "
          << table.columns.size();
      throw FormatError(msg.str());
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      Column& col = table.columns[j];
      const std::string& cell = cells[j];
      if (!col.numeric) {
        col.text.push_back(cell);
        continue;
      }
      if (is_gap(cell)) {
        col.values.emplace_back(std::nullopt);
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "cannot parse '" << cell << "' as a number at row " << row << ", column "
            << col.name;
        throw FormatError(msg.str());
      }
      col.values.emplace_back(v);
    }
  }
  return table;
}

Table read_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    out << (j ? "," : "") << table.columns[j].name;
  }
  out << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      const Column& c = table.columns[j];
      if (j) out << ',';
      if (!c.numeric) {
        out << c.text[i];
      } else if (c.values[i]) {
        out << format_double(*c.values[i]);
      }
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  write_csv(out, table);
}

Dataset select_columns(const Table& table, const ColumnRoles& roles) {
  std::vector<const Column*> xs, zs;
  for (const auto& n : roles.x_cols) xs.push_back(&table.column(n));
  for (const auto& n : roles.z_cols) zs.push_back(&table.column(n));
  const Column& yc = table.column(roles.y_col);
  const Column* dc = roles.date_col ? &table.column(*roles.date_col) : nullptr;
  for (const Column* c : xs)
    if (!c->numeric) throw ValidationError("column '" + c->name + "' is not numeric");
  for (const Column* c : zs)
    if (!c->numeric) throw ValidationError("column '" + c->name + "' is not numeric");
  if (!yc.numeric) throw ValidationError("column '" + yc.name + "' is not numeric");

  std::vector<Index> keep;
  Index dropped = 0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    bool ok = yc.values[i].has_value();
    for (const Column* c : xs) ok = ok && c->values[i].has_value();
    for (const Column* c : zs) ok = ok && c->values[i].has_value();
    if (ok) {
      keep.push_back(static_cast<Index>(i));
    } else {
      ++dropped;
    }
  }
  const auto n = static_cast<Index>(keep.size());
  Dataset d;
  d.x.resize(n, static_cast<Index>(xs.size()));
  d.z.resize(n, static_cast<Index>(zs.size()));
  d.y.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(keep[static_cast<std::size_t>(r)]);
    for (std::size_t j = 0; j < xs.size(); ++j) d.x(r, static_cast<Index>(j)) = *xs[j]->values[i];
    for (std::size_t j = 0; j < zs.size(); ++j) d.z(r, static_cast<Index>(j)) = *zs[j]->values[i];
    d.y(r) = *yc.values[i];
    if (dc) d.dates.push_back(dc->text[i]);
  }
  d.x_names = roles.x_cols;
  d.z_names = roles.z_cols;
  d.y_name = roles.y_col;
  d.source_rows = std::move(keep);
  d.dropped_rows = dropped;
  d.means = Centering::zeros(d.x.cols(), d.z.cols());
  return d;
}

std::vector<std::string> lag_feature_names(const LagSpec& spec) {
  std::vector<std::string> names;
  for (int k = spec.lags; k >= 1; --k) names.push_back(spec.nox_column + "_lag" + std::to_string(k));
  for (int k = spec.lags; k >= 1; --k) names.push_back(spec.o3_column + "_lag" + std::to_string(k));
  return names;
}

namespace {

struct LagSources {
  const Column* nox;
  const Column* o3;
};

LagSources lag_sources(const Table& table, const LagSpec& spec) {
  if (spec.lags < 1) throw ValidationError("lag count L must be at least 1");
  LagSources s{&table.column(spec.nox_column), &table.column(spec.o3_column)};
  if (!s.nox->numeric || !s.o3->numeric) throw ValidationError("lag source columns must be numeric");
  return s;
}

// Fills x for target t from rows t-L..t-1; false if any value is a gap.
bool fill_window(const LagSources& s, int lags, std::size_t t,
                 Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> x) {
  for (int k = 0; k < lags; ++k) {
    const std::size_t src = t - static_cast<std::size_t>(lags) + static_cast<std::size_t>(k);
    const auto& a = s.nox->values[src];
    const auto& b = s.o3->values[src];
    if (!a || !b) return false;
    x(k) = *a;
    x(lags + k) = *b;
  }
  return true;
}

}  // namespace

Dataset build_lagged(const Table& table, const LagSpec& spec) {
  const LagSources s = lag_sources(table, spec);
  const Column* dc = spec.date_column ? &table.column(*spec.date_column) : nullptr;
  const std::size_t rows = table.rows();
  const auto lags = static_cast<std::size_t>(spec.lags);
  const Index d = 2 * spec.lags;

  Dataset out;
  Matrix x(rows > lags ? static_cast<Index>(rows - lags) : 0, d);
  std::vector<double> zs, ys;
  Index n = 0;
  for (std::size_t t = lags; t < rows; ++t) {
    const auto& zt = s.o3->values[t];
    const auto& yt = s.nox->values[t];
    if (!zt || !yt || !fill_window(s, spec.lags, t, x.row(n))) {
      ++out.dropped_rows;
      continue;
    }
    zs.push_back(*zt);
    ys.push_back(*yt);
    out.source_rows.push_back(static_cast<Index>(t));
    if (dc) out.dates.push_back(dc->text[t]);
    ++n;
  }
  if (n < 1) throw ValidationError("lag construction produced no complete windows");
  out.x = x.topRows(n);
  out.z = Eigen::Map<const Vector>(zs.data(), n);
  out.y = Eigen::Map<const Vector>(ys.data(), n);
  out.x_names = lag_feature_names(spec);
  out.z_names = {spec.o3_column};
  out.y_name = spec.nox_column;
  out.means = Centering::zeros(d, 1);
  return out;
}

Matrix build_lag_features(const Table& table, const LagSpec& spec, std::vector<Index>& targets) {
  const LagSources s = lag_sources(table, spec);
  const std::size_t rows = table.rows();
  const auto lags = static_cast<std::size_t>(spec.lags);
  targets.clear();
  Matrix x(rows >= lags ? static_cast<Index>(rows - lags + 1) : 0, 2 * spec.lags);
  Index n = 0;
  for (std::size_t t = lags; t <= rows; ++t) {
    if (!fill_window(s, spec.lags, t, x.row(n))) continue;
    targets.push_back(static_cast<Index>(t));
    ++n;
  }
  return x.topRows(n);
}

Dataset center_fit(Dataset data) {
  if (data.n() < 1) throw ValidationError("cannot center an empty dataset");
  data.means.x_mean = data.x.colwise().mean().transpose();
  data.means.z_mean = data.z.colwise().mean().transpose();
  data.means.y_mean = data.y.mean();
  data.x.rowwise() -= data.means.x_mean.transpose();
  data.z.rowwise() -= data.means.z_mean.transpose();
  data.y.array() -= data.means.y_mean;
  data.centered = true;
  return data;
}

Dataset center_apply(Dataset data, const Centering& means) {
  if (means.x_mean.size() != data.x.cols() || means.z_mean.size() != data.z.cols()) {
    throw ShapeError("stored means do not match dataset dimensions");
  }
  data.x.rowwise() -= means.x_mean.transpose();
  data.z.rowwise() -= means.z_mean.transpose();
  data.y.array() -= means.y_mean;
  data.means = means;
  data.centered = true;
  return data;
}

namespace {

Dataset slice(const Dataset& d, Index begin, Index count) {
  Dataset out;
  out.x = d.x.middleRows(begin, count);
  out.z = d.z.middleRows(begin, count);
  out.y = d.y.segment(begin, count);
  out.means = d.means;
  out.centered = d.centered;
  out.x_names = d.x_names;
  out.z_names = d.z_names;
  out.y_name = d.y_name;
  const auto b = static_cast<std::size_t>(begin);
  const auto e = static_cast<std::size_t>(begin + count);
  if (!d.dates.empty()) out.dates.assign(d.dates.begin() + b, d.dates.begin() + e);
  if (!d.source_rows.empty()) out.source_rows.assign(d.source_rows.begin() + b, d.source_rows.begin() + e);
  return out;
}

std::pair<Dataset, Dataset> split_at(const Dataset& d, Index cut) {
  if (cut <= 0 || cut >= d.n()) {
    std::ostringstream msg;
    msg << "split leaves an empty side (" << cut << " of " << d.n() << " rows in train)";
    throw ValidationError(msg.str());
  }
  return {slice(d, 0, cut), slice(d, cut, d.n() - cut)};
}

}  // namespace

std::pair<Dataset, Dataset> split_chronological(const Dataset& data, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  const auto cut = static_cast<Index>(std::floor(fraction * static_cast<double>(data.n()) + 1e-9));
  return split_at(data, cut);
}

std::pair<Dataset, Dataset> split_by_date(const Dataset& data, const std::string& boundary) {
  if (data.dates.size() != static_cast<std::size_t>(data.n())) {
    throw ValidationError("date split requires a date column");
  }
  const auto it = std::find_if(data.dates.begin(), data.dates.end(),
                               [&](const std::string& s) { return !(s < boundary); });
  return split_at(data, static_cast<Index>(it - data.dates.begin()));
}

Dataset dataset_from_table(const Table& table, const FeatureSchema& schema) {
  Dataset d = schema.kind == FeatureSchema::Kind::lag ? build_lagged(table, schema.lag)
                                                      : select_columns(table, schema.roles);
  if (schema.feature_map == FeatureMap::quadratic) {
    d.x = feature_map_quadratic(d.x);
    const auto base = d.x_names;
    for (const auto& n : base) d.x_names.push_back(n + "^2");
    d.means = Centering::zeros(d.x.cols(), d.z.cols());
  }
  return d;
}

CsvSchema csv_schema_for(const FeatureSchema& schema) {
  CsvSchema s;
  if (schema.kind == FeatureSchema::Kind::lag && schema.lag.date_column) {
    s.text_columns.push_back(*schema.lag.date_column);
  }
  if (schema.kind == FeatureSchema::Kind::columns && schema.roles.date_col) {
    s.text_columns.push_back(*schema.roles.date_col);
  }
  return s;
}

}  // namespace robustpred
