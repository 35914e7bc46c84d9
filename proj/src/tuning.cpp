#include "psytriage/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "psytriage/parallel.hpp"
#include "psytriage/rng.hpp"
#include "text_util.hpp"

namespace psytriage {

json to_json(const CvSpec& cv) {
  return json{{"folds", cv.folds}, {"stratified", cv.stratified}, {"seed", cv.seed}};
}

CvSpec cv_spec_from_json(const json& j) {
  CvSpec cv;
  cv.folds = j.value("folds", cv.folds);
  cv.stratified = j.value("stratified", cv.stratified);
  cv.seed = j.value("seed", cv.seed);
  return cv;
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const int> labels, const CvSpec& cv) {
  const std::size_t n = labels.size();
  if (cv.folds < 2) throw Error(ErrorCode::InvalidConfig, "cross-validation needs at least 2 folds");
  if (cv.folds > n)
    throw Error(ErrorCode::InvalidConfig,
                "more folds (" + std::to_string(cv.folds) + ") than rows (" + std::to_string(n) + ")");
  Rng rng(Rng::mix(cv.seed));
  std::vector<std::vector<std::size_t>> folds(cv.folds);
  std::size_t slot = 0;
  auto deal = [&](std::vector<std::size_t> idx) {
    rng.shuffle(idx);
    for (auto i : idx) {
      folds[slot].push_back(i);
      slot = (slot + 1) % cv.folds;
    }
  };
  if (cv.stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    deal(std::move(pos));
    deal(std::move(neg));
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    deal(std::move(all));
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

TrainTestSplit split_train_test(const Dataset& data, double ratio, std::uint64_t seed, bool stratified) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidConfig, "split ratio must lie in (0, 1)");
  data.check_shape();
  Rng rng(Rng::mix(seed));
  TrainTestSplit s;
  auto take = [&](std::vector<std::size_t> idx) {
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    s.train_index.insert(s.train_index.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test_index.insert(s.test_index.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  };
  if (stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < data.size(); ++i) (data.labels[i] == 1 ? pos : neg).push_back(i);
    take(std::move(pos));
    take(std::move(neg));
  } else {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(std::move(all));
  }
  if (s.train_index.empty() || s.test_index.empty())
    throw Error(ErrorCode::EmptyPartition, "split leaves an empty partition");
  std::sort(s.train_index.begin(), s.train_index.end());
  std::sort(s.test_index.begin(), s.test_index.end());
  s.train = data.select_rows(s.train_index);
  s.test = data.select_rows(s.test_index);
  return s;
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Accuracy: return "accuracy";
    case Metric::Sensitivity: return "sensitivity";
    case Metric::Specificity: return "specificity";
    case Metric::Precision: return "precision";
    case Metric::F1: return "f1";
    case Metric::Auc: return "auc";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view text) {
  const std::string t = detail::lower_ascii(text);
  for (Metric m : {Metric::Accuracy, Metric::Sensitivity, Metric::Specificity, Metric::Precision, Metric::F1,
                   Metric::Auc})
    if (t == to_string(m)) return m;
  return std::nullopt;
}

double metric_value(Metric m, std::span<const int> y_true, std::span<const double> scores, double threshold) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (m == Metric::Auc) {
    const auto pos = static_cast<std::size_t>(std::count(y_true.begin(), y_true.end(), 1));
    if (pos == 0 || pos == y_true.size()) return nan;
    return roc_auc(y_true, scores).auc;
  }
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
  const auto s = metrics(confusion(y_true, pred));
  std::optional<double> v;
  switch (m) {
    case Metric::Accuracy: v = s.accuracy; break;
    case Metric::Sensitivity: v = s.sensitivity; break;
    case Metric::Specificity: v = s.specificity; break;
    case Metric::Precision: v = s.precision; break;
    case Metric::F1: v = s.f1; break;
    case Metric::Auc: break;
  }
  return v.value_or(nan);
}

namespace {

std::vector<std::size_t> complement(const std::vector<std::vector<std::size_t>>& folds, std::size_t f) {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < folds.size(); ++g)
    if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
  std::sort(out.begin(), out.end());
  return out;
}

void check_folds(const Dataset& data, const std::vector<std::vector<std::size_t>>& folds) {
  if (folds.size() < 2) throw Error(ErrorCode::InvalidConfig, "cross-validation needs at least 2 folds");
  const std::size_t pos_total = data.positives();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) throw Error(ErrorCode::InvalidConfig, "fold " + std::to_string(f) + " is empty");
    std::size_t pos = 0;
    for (auto i : folds[f]) pos += data.labels[i] == 1;
    const std::size_t train_n = data.size() - folds[f].size();
    const std::size_t train_pos = pos_total - pos;
    if (train_pos == 0 || train_pos == train_n)
      throw Error(ErrorCode::DegenerateFolds,
                  "training part of fold " + std::to_string(f) + " holds a single class");
  }
}

double fold_score(const ModelSpec& spec, const Dataset& data, const std::vector<std::vector<std::size_t>>& folds,
                  std::size_t f, Metric metric) {
  const auto model = train(spec, data.select_rows(complement(folds, f)));
  const Dataset held = data.select_rows(folds[f]);
  return metric_value(metric, held.labels, model.scores(held), spec.threshold);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

CvResult cross_validate(const ModelSpec& spec, const Dataset& data,
                        const std::vector<std::vector<std::size_t>>& folds, Metric metric) {
  check_folds(data, folds);
  CvResult r;
  r.fold_scores.resize(folds.size());
  parallel_for(folds.size(), [&](std::size_t f) { r.fold_scores[f] = fold_score(spec, data, folds, f, metric); });
  r.mean = mean_of(r.fold_scores);
  return r;
}

CvResult cross_validate(const ModelSpec& spec, const Dataset& data, const CvSpec& cv, Metric metric) {
  return cross_validate(spec, data, make_folds(data.labels, cv), metric);
}

// ---------------------------------------------------------------------------
// Search

json to_json(const SearchSpec& s) {
  json space = json::object();
  for (const auto& [name, d] : s.space) {
    if (d.is_list()) {
      space[name] = d.values;
    } else {
      json r{{"low", d.low.value_or(0.0)}, {"high", d.high.value_or(0.0)}};
      if (d.log_scale) r["log"] = true;
      if (d.integer) r["integer"] = true;
      space[name] = r;
    }
  }
  return json{{"mode", s.mode == SearchMode::Grid ? "grid" : "random"},
              {"budget", s.budget},
              {"seed", s.seed},
              {"space", space}};
}

SearchSpec search_spec_from_json(const json& j) {
  SearchSpec s;
  const std::string mode = detail::lower_ascii(j.value("mode", std::string("grid")));
  if (mode == "grid") s.mode = SearchMode::Grid;
  else if (mode == "random") s.mode = SearchMode::Random;
  else throw Error(ErrorCode::InvalidConfig, "unknown search mode '" + mode + "'");
  s.budget = j.value("budget", s.budget);
  s.seed = j.value("seed", s.seed);
  if (j.contains("space")) {
    for (const auto& [name, v] : j.at("space").items()) {
      ParamDomain d;
      if (v.is_array()) {
        d.values = v.get<std::vector<double>>();
      } else if (v.is_number()) {
        d.values = {v.get<double>()};
      } else if (v.is_object()) {
        d.low = v.at("low").get<double>();
        d.high = v.at("high").get<double>();
        d.log_scale = v.value("log", false);
        d.integer = v.value("integer", false);
      } else {
        throw Error(ErrorCode::InvalidConfig, "search domain for '" + name + "' must be a list or a range");
      }
      s.space[name] = std::move(d);
    }
  }
  return s;
}

SearchSpec default_search_space(ModelKind kind) {
  SearchSpec s;
  auto& sp = s.space;
  switch (kind) {
    case ModelKind::SVM:
      sp["lambda"].values = {1e-4, 1e-3, 1e-2};
      break;
    case ModelKind::RF:
      sp["n_trees"].values = {100};
      sp["max_depth"].values = {6, 10, 0};
      sp["min_samples_leaf"].values = {1, 5};
      break;
    case ModelKind::XGB:
      sp["n_rounds"].values = {50, 150};
      sp["max_depth"].values = {2, 3};
      sp["eta"].values = {0.1, 0.3};
      break;
    case ModelKind::KNN:
      sp["k"].values = {5, 11, 21, 41};
      break;
    case ModelKind::NB:
      sp["var_smoothing"].values = {1e-9, 1e-3};
      break;
    case ModelKind::LR:
      sp["lambda"].values = {1e-4, 1e-3, 1e-2, 1e-1};
      break;
    case ModelKind::MLPC:
      sp["hidden"].values = {8, 16};
      sp["learning_rate"].values = {0.05, 0.2};
      sp["epochs"].values = {100};
      break;
  }
  return s;
}

namespace {

std::vector<Hyperparameters> grid_points(const std::map<std::string, ParamDomain>& space) {
  std::vector<Hyperparameters> out{{}};
  for (const auto& [name, d] : space) {
    std::vector<Hyperparameters> next;
    next.reserve(out.size() * d.values.size());
    for (const auto& p : out) {
      for (double v : d.values) {
        auto q = p;
        q[name] = v;
        next.push_back(std::move(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

double draw(const ParamDomain& d, Rng& rng) {
  if (d.is_list()) return d.values[static_cast<std::size_t>(rng.below(d.values.size()))];
  double v = d.log_scale ? std::exp(rng.uniform(std::log(*d.low), std::log(*d.high))) : rng.uniform(*d.low, *d.high);
  if (d.integer) v = std::round(v);
  return v;
}

}  // namespace

SearchResult search(const ModelSpec& base, const SearchSpec& spec, const CvSpec& cv, const Dataset& data) {
  if (spec.space.empty()) throw Error(ErrorCode::EmptySpace, "search space is empty");
  bool all_lists = true;
  for (const auto& [name, d] : spec.space) {
    if (d.is_list()) continue;
    if (!d.low || !d.high) throw Error(ErrorCode::EmptySpace, "domain for '" + name + "' is empty");
    if (*d.low > *d.high) throw Error(ErrorCode::InvalidConfig, "range for '" + name + "' has low > high");
    if (d.log_scale && *d.low <= 0)
      throw Error(ErrorCode::InvalidConfig, "log range for '" + name + "' must be positive");
    all_lists = false;
  }

  std::vector<Hyperparameters> points;
  std::vector<std::size_t> order;
  if (spec.mode == SearchMode::Grid) {
    if (!all_lists) throw Error(ErrorCode::InvalidConfig, "grid search needs value lists, not ranges");
    points = grid_points(spec.space);
    order.resize(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    if (spec.budget < 1) throw Error(ErrorCode::InvalidConfig, "random search budget must be at least 1");
    Rng rng(Rng::mix(spec.seed));
    if (all_lists) {
      // sample grid points without replacement (Floyd), kept in grid order
      auto grid = grid_points(spec.space);
      const std::size_t total = grid.size();
      const std::size_t m = std::min(spec.budget, total);
      std::set<std::size_t> chosen;
      for (std::size_t j = total - m; j < total; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
      }
      for (auto i : chosen) {
        points.push_back(grid[i]);
        order.push_back(i);
      }
    } else {
      for (std::size_t i = 0; i < spec.budget; ++i) {
        Hyperparameters p;
        for (const auto& [name, d] : spec.space) p[name] = draw(d, rng);
        points.push_back(std::move(p));
        order.push_back(i);
      }
    }
  }
  if (points.empty()) throw Error(ErrorCode::EmptySpace, "search space has no candidates");

  std::vector<ModelSpec> candidates;
  for (const auto& p : points) {
    ModelSpec c = base;
    for (const auto& [k, v] : p) c.params[k] = v;
    candidates.push_back(resolve(c));
  }

  const auto folds = make_folds(data.labels, cv);
  check_folds(data, folds);
  const std::size_t k = folds.size();
  std::vector<double> scores(candidates.size() * k);
  parallel_for(scores.size(), [&](std::size_t t) {
    scores[t] = fold_score(candidates[t / k], data, folds, t % k, Metric::Accuracy);
  });

  SearchResult r;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    LeaderboardRow row;
    row.params = candidates[c].params;
    row.cv.fold_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(c * k),
                              scores.begin() + static_cast<std::ptrdiff_t>((c + 1) * k));
    row.cv.mean = mean_of(row.cv.fold_scores);
    row.order = order[c];
    r.leaderboard.push_back(std::move(row));
  }
  std::stable_sort(r.leaderboard.begin(), r.leaderboard.end(), [](const auto& a, const auto& b) {
    if (a.cv.mean != b.cv.mean) return a.cv.mean > b.cv.mean;
    return a.order < b.order;
  });
  r.best = base;
  r.best.params = r.leaderboard.front().params;
  return r;
}

json to_json(const SearchResult& r) {
  json rows = json::array();
  for (const auto& row : r.leaderboard) {
    rows.push_back(json{{"order", row.order},
                        {"params", row.params},
                        {"mean_accuracy", row.cv.mean},
                        {"fold_accuracy", row.cv.fold_scores}});
  }
  return json{{"best", to_json(r.best)}, {"leaderboard", rows}};
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<EvaluationRow> evaluate_all(const std::vector<ModelSpec>& specs, const Dataset& train_set,
                                        const Dataset& test) {
  if (specs.empty()) throw Error(ErrorCode::InvalidConfig, "no models to evaluate");
  std::vector<EvaluationRow> rows(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) {
    rows[i].spec = specs[i];
    try {
      const auto model = train(specs[i], train_set);
      rows[i].report = metrics_report(test.labels, model.scores(test), specs[i].threshold);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });
  std::stable_sort(rows.begin(), rows.end(), [](const EvaluationRow& a, const EvaluationRow& b) {
    const double x = a.report ? a.report->scalars.accuracy.value_or(-1.0) : -2.0;
    const double y = b.report ? b.report->scalars.accuracy.value_or(-1.0) : -2.0;
    return x > y;
  });
  return rows;
}

std::string format_percent(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

std::string format_metrics_table(const std::vector<EvaluationRow>& rows) {
  std::ostringstream out;
  out << "model,accuracy,sensitivity,specificity,precision,f1\n";
  for (const auto& r : rows) {
    out << model_name(r.spec.kind);
    if (r.report) {
      const auto& s = r.report->scalars;
      for (const auto& v : {s.accuracy, s.sensitivity, s.specificity, s.precision, s.f1})
        out << ',' << format_percent(v);
    } else {
      out << ",NA,NA,NA,NA,NA";
    }
    out << '\n';
  }
  return out.str();
}

std::string format_roc_csv(const std::vector<RocPoint>& points) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& p : points)
    out << detail::format_number(p.fpr) << ',' << detail::format_number(p.tpr) << ','
        << detail::format_number(p.threshold) << '\n';
  return out.str();
}

void write_roc_files(const std::filesystem::path& dir, const std::vector<EvaluationRow>& rows) {
  std::filesystem::create_directories(dir);
  for (const auto& r : rows) {
    if (!r.report || r.report->roc_points.empty()) continue;
    std::string name(model_name(r.spec.kind));
    std::replace(name.begin(), name.end(), '-', '_');
    write_text_file(dir / ("roc_" + detail::lower_ascii(name) + ".csv"), format_roc_csv(r.report->roc_points));
  }
}

}  // namespace psytriage
