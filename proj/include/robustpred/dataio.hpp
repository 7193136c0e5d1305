#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robustpred/linear_core.hpp"
#include "robustpred/predictors.hpp"

namespace robustpred {

/// One CSV column. Numeric columns hold nullopt for gaps (empty, NA, NaN);
/// text columns (dates) keep the raw strings.
struct Column {
  std::string name;
  bool numeric = true;
  std::vector<std::optional<double>> values;
  std::vector<std::string> text;

  std::size_t size() const { return numeric ? values.size() : text.size(); }
};

struct Table {
  std::vector<Column> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  /// Throws ValidationError naming the missing column and the ones present.
  const Column& column(const std::string& name) const;
};

struct CsvSchema {
  std::vector<std::string> text_columns;  // e.g. an ISO-8601 date column
};

/// Comma-separated, '.' decimal point, header row required. Parse errors
/// name the 1-based file row (header is row 1) and the column label.
Table read_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Table parse_csv(std::istream& in, const CsvSchema& schema = {});

/// Numbers are written with 17 significant digits; gaps as empty cells.
void write_csv(const std::filesystem::path& path, const Table& table);
void write_csv(std::ostream& out, const Table& table);

/// Formats a double with 17 significant digits.
std::string format_double(double v);

/// Row-aligned (x, z, y) with the centering captured from training data.
struct Dataset {
  Matrix x;
  Matrix z;
  Vector y;
  Centering means;
  bool centered = false;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::string y_name;
  std::vector<std::string> dates;   // per row, empty when no date column
  std::vector<Index> source_rows;   // table row each sample was built from
  Index dropped_rows = 0;           // rows skipped because of gaps

  Index n() const { return x.rows(); }
};

struct ColumnRoles {
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
  std::string y_col;
  std::optional<std::string> date_col;
};

/// Extracts the named columns, dropping any row with a gap in them.
Dataset select_columns(const Table& table, const ColumnRoles& roles);

/// Daily lag construction: for target day t, x = (NOx[t-L..t-1], O3[t-L..t-1])
/// (oldest first), z = O3[t], y = NOx[t]. Windows touching a gap are dropped.
struct LagSpec {
  int lags = 7;
  std::string nox_column = "nox";
  std::string o3_column = "o3";
  std::optional<std::string> date_column;
};

Dataset build_lagged(const Table& table, const LagSpec& spec);

/// Lagged x rows for prediction only (z and y unknown), one per target day
/// t = L..rows, where t = rows is the day after the series ends. Windows with
/// gaps are skipped; `targets` receives each t.
Matrix build_lag_features(const Table& table, const LagSpec& spec, std::vector<Index>& targets);

/// Names of the 2L lagged feature columns in build_lagged order.
std::vector<std::string> lag_feature_names(const LagSpec& spec);

/// Centers all blocks with the dataset's own means and records them.
Dataset center_fit(Dataset data);

/// Shifts by previously fitted (training) means.
Dataset center_apply(Dataset data, const Centering& means);

/// Order-preserving prefix/suffix split; floor(fraction * n) rows go to train.
std::pair<Dataset, Dataset> split_chronological(const Dataset& data, double fraction);

/// Rows dated strictly before `boundary` (ISO-8601 string compare) go to train.
std::pair<Dataset, Dataset> split_by_date(const Dataset& data, const std::string& boundary);

/// Feature pipeline applied to the selected x columns before fitting.
enum class FeatureMap { identity, quadratic };

/// Everything needed to rebuild a model's inputs from a CSV file.
struct FeatureSchema {
  enum class Kind { columns, lag };
  Kind kind = Kind::columns;
  ColumnRoles roles;
  LagSpec lag;
  FeatureMap feature_map = FeatureMap::identity;
};

/// Applies the schema (column selection or lag construction, then the
/// feature map) to a table.
Dataset dataset_from_table(const Table& table, const FeatureSchema& schema);

/// Text columns the schema needs to read as strings.
CsvSchema csv_schema_for(const FeatureSchema& schema);

}  // namespace robustpred
