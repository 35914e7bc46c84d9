#pragma once

#include <string>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"
#include "psytriage/learners.hpp"
#include "psytriage/tuning.hpp"

namespace psytriage {

/// |x - y| / |y| * 100. Throws ZeroReference when y == 0.
double relative_deviation(double x, double y);

/// What to do with a feature whose reference mean is zero but which does occur
/// among psychiatric cases. Features absent from both groups are rejected.
enum class ZeroReferencePolicy { Select, Reject };

struct SelectionReport {
  std::vector<RelevanceScore> scores;
  double threshold = 3.0;  // on the ratio |x - y| / |y|
  ZeroReferencePolicy zero_reference = ZeroReferencePolicy::Select;
  std::vector<std::string> selected;
  std::vector<std::string> rejected;
};

/// Per-feature mean over each group and the ratio score; features scoring at
/// least `threshold` are selected. Throws InvalidValue for empty groups or
/// rows of the wrong width.
SelectionReport filter_select(const std::vector<std::vector<double>>& psychiatric,
                              const std::vector<std::vector<double>>& reference,
                              const std::vector<std::string>& feature_names, double threshold = 3.0,
                              ZeroReferencePolicy policy = ZeroReferencePolicy::Select);

/// Text-category presence split by label (Unknown labels skipped).
SelectionReport filter_select(const std::vector<CaseFeatures>& cases, double threshold = 3.0,
                              ZeroReferencePolicy policy = ZeroReferencePolicy::Select);

json to_json(const SelectionReport& r);
SelectionReport selection_report_from_json(const json& j);

struct RfecvOptions {
  Metric metric = Metric::Accuracy;
  std::size_t min_features = 1;
  std::size_t permutation_repeats = 5;
  std::uint64_t seed = 0;  // permutation stream
};

struct RfecvStep {
  std::vector<std::string> features;
  CvResult cv;
  /// Mean drop of the metric when each feature is permuted within the
  /// validation folds, aligned with `features`.
  std::vector<double> importance;
  std::string eliminated;  // empty on the last step
};

struct RfecvResult {
  std::vector<std::string> best_features;
  double best_score = 0.0;
  std::vector<RfecvStep> steps;  // from all features down to min_features
  std::vector<std::string> elimination_order;
};

/// Recursive feature elimination with cross-validation. Each step drops the
/// feature with the smallest permutation importance (ties: earliest column).
/// The subset with the highest mean CV score wins, ties going to the smaller
/// subset. Throws InvalidConfig for fewer than 2 features, DegenerateFolds.
RfecvResult rfecv(const Dataset& train, const ModelSpec& spec, const CvSpec& cv, const RfecvOptions& options = {});

json to_json(const RfecvResult& r);

}  // namespace psytriage
