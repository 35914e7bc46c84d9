#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"
#include "psytriage/table.hpp"

namespace psytriage {

enum class ColumnType { Numeric, Integer, Text, Boolean };

struct IngestConfig {
  std::string key_column = "case_id";
  std::vector<std::string> drop_columns;
  std::map<std::string, ColumnType> column_types = default_column_types();
  double iqr_multiplier = 1.5;
  /// Columns that get IQR outlier replacement. Ordinal scales with a large
  /// point mass (GCS) are left out by default: their IQR is often zero.
  std::vector<std::string> iqr_columns = {"systolic_bp", "respiratory_rate"};
  std::vector<std::string> negative_forbidden_columns = {"systolic_bp", "respiratory_rate",
                                                         "pulse_rate"};
  /// Manual spelling fixes for text columns, matched case-insensitively on word boundaries.
  std::map<std::string, std::string> text_aliases;
  char delimiter = ',';
  /// Column names and token maps for record construction. Its circulation
  /// token map is the configurable circulation normalization.
  RecordSchema schema;

  static std::map<std::string, ColumnType> default_column_types();
  /// Throws InvalidConfig.
  void validate() const;
};

IngestConfig ingest_config_from_json(const json& j);
json to_json(const IngestConfig& cfg);

/// One output row per distinct key, in first-seen order across tables.
/// Columns are the union of all table headers in first-seen order. Per cell,
/// equal non-empty values collapse to one; differing values are joined with ','
/// in first-seen order.
Table merge_cases(const std::vector<Table>& tables, const IngestConfig& cfg);

struct ReduceResult {
  Table table;
  std::vector<std::string> log;
};

/// Drops the configured columns, then any column whose cells equal an earlier
/// kept column on every row. The key column is never dropped.
ReduceResult reduce_columns(const Table& table, const IngestConfig& cfg);

struct IqrResult {
  std::vector<double> cleaned;
  std::vector<std::size_t> outlier_indices;
  double replacement = 0.0;  // mean of in-fence values
  double q1 = 0.0, q3 = 0.0;
  double lower_fence = 0.0, upper_fence = 0.0;
};

/// Quartiles use linear interpolation on the sorted sample (position
/// (n - 1) * p). Values outside [Q1 - m*IQR, Q3 + m*IQR] are replaced by the
/// mean of the in-fence values.
IqrResult iqr_filter(std::span<const double> values, double multiplier = 1.5);

/// Linear-interpolation quantile of an already sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

struct ImputeResult {
  Table table;
  std::vector<std::string> log;
  /// Boolean columns that still contain missing cells.
  std::vector<std::string> flagged;
};

/// Fills missing numeric cells with the column mean of present values
/// (rounded for Integer columns). Boolean cells are left missing and flagged.
ImputeResult impute(const Table& table, const IngestConfig& cfg);

struct LabeledSplit {
  std::vector<RescueRecord> psychiatric;
  std::vector<RescueRecord> non_psychiatric;
  std::size_t excluded_unknown = 0;
};

LabeledSplit label_and_split(const std::vector<RescueRecord>& records);

struct RejectedRow {
  std::string case_id;
  std::vector<FieldError> errors;
};

struct IngestResult {
  std::vector<RescueRecord> records;
  std::vector<RejectedRow> rejected;
  std::vector<std::string> log;
};

/// Full cleaning chain: merge, reduce, collapse multi-reading numeric cells to
/// the first reading, clear definite outliers (negative vitals), strip quotes
/// and brackets from text, apply aliases, IQR replacement, imputation, and
/// record validation.
IngestResult run_ingest(const std::vector<Table>& tables, const IngestConfig& cfg);

}  // namespace psytriage
