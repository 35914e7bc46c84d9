#include "psytriage/featselect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "psytriage/parallel.hpp"
#include "psytriage/rng.hpp"

namespace psytriage {

double relative_deviation(double x, double y) {
  if (y == 0.0) throw Error(ErrorCode::ZeroReference, "relative deviation undefined for a zero reference");
  return std::abs(x - y) / std::abs(y) * 100.0;
}

namespace {

std::vector<double> column_means(const std::vector<std::vector<double>>& rows, std::size_t width,
                                 const char* group) {
  if (rows.empty()) throw Error(ErrorCode::InvalidValue, std::string(group) + " group is empty");
  std::vector<double> mean(width, 0.0);
  for (const auto& r : rows) {
    if (r.size() != width) throw Error(ErrorCode::ArityMismatch, std::string(group) + " row has the wrong width");
    for (std::size_t j = 0; j < width; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

SelectionReport filter_select(const std::vector<std::vector<double>>& psychiatric,
                              const std::vector<std::vector<double>>& reference,
                              const std::vector<std::string>& feature_names, double threshold,
                              ZeroReferencePolicy policy) {
  const std::size_t d = feature_names.size();
  const auto x = column_means(psychiatric, d, "psychiatric");
  const auto y = column_means(reference, d, "reference");
  SelectionReport report;
  report.threshold = threshold;
  report.zero_reference = policy;
  report.scores.resize(d);
  parallel_for(d, [&](std::size_t j) {
    RelevanceScore& s = report.scores[j];
    s.feature_name = feature_names[j];
    s.observed_mean = x[j];
    s.reference_mean = y[j];
    if (y[j] == 0.0) {
      s.zero_reference = true;
    } else {
      s.percent = relative_deviation(x[j], y[j]);
      s.score = std::abs(x[j] - y[j]) / std::abs(y[j]);
    }
  });
  for (const auto& s : report.scores) {
    bool keep;
    if (s.zero_reference) keep = policy == ZeroReferencePolicy::Select && s.observed_mean != 0.0;
    else keep = *s.score >= threshold;
    (keep ? report.selected : report.rejected).push_back(s.feature_name);
  }
  return report;
}

SelectionReport filter_select(const std::vector<CaseFeatures>& cases, double threshold, ZeroReferencePolicy policy) {
  std::vector<std::string> names;
  for (Category c : kAllCategories) names.emplace_back(category_id(c));
  std::vector<std::vector<double>> psy, ref;
  for (const auto& c : cases) {
    if (c.label == Label::Unknown) continue;
    std::vector<double> row;
    for (bool b : c.text.presence()) row.push_back(b ? 1.0 : 0.0);
    (c.label == Label::Psychiatric ? psy : ref).push_back(std::move(row));
  }
  return filter_select(psy, ref, names, threshold, policy);
}

json to_json(const SelectionReport& r) {
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back(to_json(s));
  return json{{"threshold", r.threshold},
              {"threshold_scale", "ratio"},
              {"zero_reference_policy", r.zero_reference == ZeroReferencePolicy::Select ? "select" : "reject"},
              {"scores", scores},
              {"selected", r.selected},
              {"rejected", r.rejected}};
}

SelectionReport selection_report_from_json(const json& j) {
  SelectionReport r;
  r.threshold = j.at("threshold").get<double>();
  r.zero_reference =
      j.value("zero_reference_policy", std::string("select")) == "reject" ? ZeroReferencePolicy::Reject
                                                                           : ZeroReferencePolicy::Select;
  for (const auto& s : j.at("scores")) {
    RelevanceScore rs;
    rs.feature_name = s.at("feature").get<std::string>();
    rs.observed_mean = s.at("observed_mean").get<double>();
    rs.reference_mean = s.at("reference_mean").get<double>();
    if (s.contains("score") && !s.at("score").is_null()) rs.score = s.at("score").get<double>();
    if (s.contains("relative_deviation_percent") && !s.at("relative_deviation_percent").is_null())
      rs.percent = s.at("relative_deviation_percent").get<double>();
    rs.zero_reference = s.value("zero_reference", false);
    r.scores.push_back(std::move(rs));
  }
  r.selected = j.at("selected").get<std::vector<std::string>>();
  r.rejected = j.at("rejected").get<std::vector<std::string>>();
  return r;
}

// ---------------------------------------------------------------------------
// RFECV

namespace {

struct FoldImportance {
  double baseline = 0.0;
  std::vector<double> drop;
};

FoldImportance fold_importance(const ModelSpec& spec, const Dataset& data,
                               const std::vector<std::vector<std::size_t>>& folds, std::size_t f,
                               const RfecvOptions& opt, std::uint64_t step) {
  std::vector<std::size_t> train_idx;
  for (std::size_t g = 0; g < folds.size(); ++g)
    if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
  std::sort(train_idx.begin(), train_idx.end());
  const auto model = train(spec, data.select_rows(train_idx));
  Dataset held = data.select_rows(folds[f]);

  FoldImportance out;
  out.baseline = metric_value(opt.metric, held.labels, model.scores(held), spec.threshold);
  out.drop.assign(data.arity(), 0.0);
  for (std::size_t j = 0; j < data.arity(); ++j) {
    const auto original = held.column(j);
    double total = 0.0;
    for (std::size_t r = 0; r < opt.permutation_repeats; ++r) {
      const std::uint64_t stream = Rng::mix(Rng::mix(Rng::mix(step) ^ f) ^ j) ^ r;
      Rng rng = Rng::derive(opt.seed, stream);
      auto shuffled = original;
      rng.shuffle(shuffled);
      for (std::size_t i = 0; i < held.size(); ++i) held.rows[i][j] = shuffled[i];
      total += out.baseline - metric_value(opt.metric, held.labels, model.scores(held), spec.threshold);
    }
    for (std::size_t i = 0; i < held.size(); ++i) held.rows[i][j] = original[i];
    out.drop[j] = total / static_cast<double>(opt.permutation_repeats);
  }
  return out;
}

double rank_value(double v) { return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v; }

}  // namespace

RfecvResult rfecv(const Dataset& train_set, const ModelSpec& spec, const CvSpec& cv, const RfecvOptions& opt) {
  train_set.check_shape();
  if (train_set.arity() < 2) throw Error(ErrorCode::InvalidConfig, "RFECV needs at least 2 features");
  if (opt.permutation_repeats < 1) throw Error(ErrorCode::InvalidConfig, "permutation_repeats must be >= 1");
  const std::size_t min_features = std::clamp<std::size_t>(opt.min_features, 1, train_set.arity());
  const auto folds = make_folds(train_set.labels, cv);
  // surfaces DegenerateFolds before any fitting
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::size_t pos = 0;
    for (auto i : folds[f]) pos += train_set.labels[i] == 1;
    const std::size_t tn = train_set.size() - folds[f].size();
    const std::size_t tp = train_set.positives() - pos;
    if (tp == 0 || tp == tn)
      throw Error(ErrorCode::DegenerateFolds, "training part of fold " + std::to_string(f) + " holds a single class");
  }

  RfecvResult result;
  std::vector<std::string> current = train_set.feature_names;
  for (std::uint64_t step = 0;; ++step) {
    const Dataset data = train_set.select_columns(current);
    std::vector<FoldImportance> per_fold(folds.size());
    parallel_for(folds.size(), [&](std::size_t f) { per_fold[f] = fold_importance(spec, data, folds, f, opt, step); });

    RfecvStep s;
    s.features = current;
    s.importance.assign(current.size(), 0.0);
    for (const auto& fi : per_fold) {
      s.cv.fold_scores.push_back(fi.baseline);
      for (std::size_t j = 0; j < current.size(); ++j) s.importance[j] += fi.drop[j];
    }
    for (auto& v : s.importance) v /= static_cast<double>(folds.size());
    s.cv.mean = std::accumulate(s.cv.fold_scores.begin(), s.cv.fold_scores.end(), 0.0) /
                static_cast<double>(folds.size());

    if (current.size() > min_features) {
      std::size_t worst = 0;
      for (std::size_t j = 1; j < current.size(); ++j)
        if (rank_value(s.importance[j]) < rank_value(s.importance[worst])) worst = j;
      s.eliminated = current[worst];
      result.elimination_order.push_back(current[worst]);
      current.erase(current.begin() + static_cast<std::ptrdiff_t>(worst));
      result.steps.push_back(std::move(s));
    } else {
      result.steps.push_back(std::move(s));
      break;
    }
  }

  const RfecvStep* best = &result.steps.front();
  for (const auto& s : result.steps)
    if (rank_value(s.cv.mean) >= rank_value(best->cv.mean)) best = &s;
  result.best_features = best->features;
  result.best_score = best->cv.mean;
  return result;
}

json to_json(const RfecvResult& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    json imp = json::object();
    for (std::size_t j = 0; j < s.features.size(); ++j) imp[s.features[j]] = s.importance[j];
    steps.push_back(json{{"n_features", s.features.size()},
                         {"features", s.features},
                         {"mean_score", s.cv.mean},
                         {"fold_scores", s.cv.fold_scores},
                         {"importance", imp},
                         {"eliminated", s.eliminated.empty() ? json(nullptr) : json(s.eliminated)}});
  }
  return json{{"best_features", r.best_features},
              {"best_score", r.best_score},
              {"elimination_order", r.elimination_order},
              {"steps", steps}};
}

}  // namespace psytriage
