#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"
#include "psytriage/learners.hpp"
#include "psytriage/metrics.hpp"

namespace psytriage {

struct CvSpec {
  std::size_t folds = 5;
  bool stratified = true;
  std::uint64_t seed = 0;
};

json to_json(const CvSpec& cv);
CvSpec cv_spec_from_json(const json& j);

/// Validation index sets, one per fold, each sorted ascending. Throws
/// InvalidConfig when folds < 2 or folds > n.
std::vector<std::vector<std::size_t>> make_folds(std::span<const int> labels, const CvSpec& cv);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Seeded shuffle split; train gets round(ratio * n) rows (per class when
/// stratified). Throws InvalidConfig for ratio outside (0, 1), EmptyPartition.
TrainTestSplit split_train_test(const Dataset& data, double ratio, std::uint64_t seed, bool stratified = true);

enum class Metric { Accuracy, Sensitivity, Specificity, Precision, F1, Auc };

std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view text);

/// Metric value on one evaluation set; NaN when undefined.
double metric_value(Metric m, std::span<const int> y_true, std::span<const double> scores, double threshold);

struct CvResult {
  std::vector<double> fold_scores;
  double mean = 0.0;
};

/// Trains on k-1 folds and scores the held-out fold, for each fold. Throws
/// DegenerateFolds when a training partition holds a single class.
CvResult cross_validate(const ModelSpec& spec, const Dataset& data, const CvSpec& cv,
                        Metric metric = Metric::Accuracy);

/// Same, with precomputed folds.
CvResult cross_validate(const ModelSpec& spec, const Dataset& data,
                        const std::vector<std::vector<std::size_t>>& folds, Metric metric = Metric::Accuracy);

enum class SearchMode { Grid, Random };

/// Candidate values of one hyperparameter: an explicit list, or a range for
/// random search (log-uniform when log_scale, rounded when integer).
struct ParamDomain {
  std::vector<double> values;
  std::optional<double> low;
  std::optional<double> high;
  bool log_scale = false;
  bool integer = false;

  bool is_list() const { return !values.empty(); }
};

struct SearchSpec {
  SearchMode mode = SearchMode::Grid;
  std::map<std::string, ParamDomain> space;
  std::size_t budget = 10;  // random mode only
  std::uint64_t seed = 0;
};

json to_json(const SearchSpec& s);
SearchSpec search_spec_from_json(const json& j);

/// Small per-model grid used by the pipeline.
SearchSpec default_search_space(ModelKind kind);

struct LeaderboardRow {
  Hyperparameters params;  // resolved
  CvResult cv;
  std::size_t order = 0;   // enumeration index of the candidate
};

struct SearchResult {
  ModelSpec best;
  /// Sorted by mean CV accuracy descending, ties by enumeration order.
  std::vector<LeaderboardRow> leaderboard;
};

/// Candidates are ranked by mean CV accuracy. Random mode samples `budget`
/// candidates; when every domain is a list it samples grid points without
/// replacement. Throws EmptySpace, InvalidConfig, InvalidHyperparameter.
SearchResult search(const ModelSpec& base, const SearchSpec& search, const CvSpec& cv, const Dataset& data);

json to_json(const SearchResult& r);

struct EvaluationRow {
  ModelSpec spec;
  std::optional<MetricsReport> report;
  std::string error;  // set when training or scoring failed
};

/// Trains each spec on train and evaluates on test. Failures are recorded per
/// row. Rows are sorted by accuracy descending (failed rows last), ties in
/// input order.
std::vector<EvaluationRow> evaluate_all(const std::vector<ModelSpec>& specs, const Dataset& train,
                                        const Dataset& test);

/// CSV with header model,accuracy,sensitivity,specificity,precision,f1;
/// percentages with two decimals, NA when undefined.
std::string format_metrics_table(const std::vector<EvaluationRow>& rows);
std::string format_percent(const std::optional<double>& v);
/// fpr,tpr,threshold rows.
std::string format_roc_csv(const std::vector<RocPoint>& points);

/// Writes one ROC CSV per successful row, named roc_<model>.csv.
void write_roc_files(const std::filesystem::path& dir, const std::vector<EvaluationRow>& rows);

}  // namespace psytriage
