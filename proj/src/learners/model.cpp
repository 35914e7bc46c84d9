#include <algorithm>
#include <cmath>

#include "../text_util.hpp"
#include "fitted.hpp"
#include "psytriage/learners.hpp"

namespace psytriage {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::SVM: return "SVM";
    case ModelKind::RF: return "RF";
    case ModelKind::XGB: return "XGB";
    case ModelKind::KNN: return "K-NN";
    case ModelKind::NB: return "NB";
    case ModelKind::LR: return "LR";
    case ModelKind::MLPC: return "MLPC";
  }
  return "";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  std::string t = detail::lower_ascii(detail::trim(text));
  t.erase(std::remove(t.begin(), t.end(), '-'), t.end());
  if (t == "ann" || t == "mlp") return ModelKind::MLPC;
  if (t == "xgboost") return ModelKind::XGB;
  for (auto k : kAllModelKinds) {
    std::string name = detail::lower_ascii(model_name(k));
    name.erase(std::remove(name.begin(), name.end(), '-'), name.end());
    if (t == name) return k;
  }
  return std::nullopt;
}

const std::vector<ParamSchema>& param_schema(ModelKind kind) {
  static const std::vector<ParamSchema> svm = {
      {"lambda", 1e-3, 0.0, 1e3, false, true},
      {"epochs", 20, 1, 1e4, true, false},
  };
  static const std::vector<ParamSchema> rf = {
      {"n_trees", 100, 1, 5000, true, false},
      {"max_depth", 0, 0, 1000, true, false},  // 0 = unbounded
      {"min_samples_leaf", 1, 1, 1e6, true, false},
      {"max_features", 0, 0, 1e6, true, false},  // 0 = floor(sqrt(d))
  };
  static const std::vector<ParamSchema> xgb = {
      {"n_rounds", 100, 0, 1e5, true, false},
      {"eta", 0.3, 0.0, 1.0, false, true},
      {"max_depth", 3, 1, 32, true, false},
      {"lambda", 1.0, 0.0, 1e6, false, false},
      {"min_child_weight", 1.0, 0.0, 1e6, false, false},
      {"gamma", 0.0, 0.0, 1e6, false, false},
  };
  static const std::vector<ParamSchema> knn = {
      {"k", 5, 1, 1e6, true, false},
  };
  static const std::vector<ParamSchema> nb = {
      {"var_smoothing", 1e-9, 0.0, 1.0, false, false},
      {"alpha", 1.0, 0.0, 1e6, false, false},
  };
  static const std::vector<ParamSchema> lr = {
      {"lambda", 1e-3, 0.0, 1e3, false, false},
      {"max_epochs", 1000, 1, 1e6, true, false},
      {"tol", 1e-6, 0.0, 1.0, false, true},
      {"learning_rate", 0.0, 0.0, 1e3, false, false},  // 0 = 1 / Lipschitz bound
  };
  static const std::vector<ParamSchema> mlpc = {
      {"hidden", 16, 1, 4096, true, false},
      {"learning_rate", 0.1, 0.0, 10.0, false, true},
      {"epochs", 200, 0, 1e5, true, false},
      {"batch_size", 32, 1, 1e6, true, false},
      {"l2", 1e-4, 0.0, 1e3, false, false},
  };
  switch (kind) {
    case ModelKind::SVM: return svm;
    case ModelKind::RF: return rf;
    case ModelKind::XGB: return xgb;
    case ModelKind::KNN: return knn;
    case ModelKind::NB: return nb;
    case ModelKind::LR: return lr;
    case ModelKind::MLPC: return mlpc;
  }
  return lr;
}

ModelSpec resolve(const ModelSpec& spec) {
  const auto& schema = param_schema(spec.kind);
  const std::string kind(model_name(spec.kind));
  for (const auto& [name, value] : spec.params) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const auto& s) { return s.name == name; });
    if (it == schema.end())
      throw Error(ErrorCode::InvalidHyperparameter, kind + " has no hyperparameter '" + name + "'");
  }
  ModelSpec out = spec;
  for (const auto& s : schema) {
    auto it = spec.params.find(s.name);
    const double v = it == spec.params.end() ? s.default_value : it->second;
    const bool low = s.min_exclusive ? !(v > s.min) : !(v >= s.min);
    if (!std::isfinite(v) || low || v > s.max || (s.integer && v != std::round(v)))
      throw Error(ErrorCode::InvalidHyperparameter,
                  kind + "." + s.name + " = " + detail::format_number(v) + " outside " +
                      (s.min_exclusive ? "(" : "[") + detail::format_number(s.min) + ", " +
                      detail::format_number(s.max) + "]" + (s.integer ? " (integer)" : ""));
    out.params[s.name] = v;
  }
  if (!(spec.threshold > 0.0 && spec.threshold < 1.0))
    throw Error(ErrorCode::InvalidHyperparameter, "decision threshold must be in (0, 1)");
  return out;
}

json to_json(const ModelSpec& spec) {
  json params = json::object();
  for (const auto& [k, v] : spec.params) params[k] = v;
  return json{{"kind", std::string(model_name(spec.kind))},
              {"params", params},
              {"seed", spec.seed},
              {"threshold", spec.threshold}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  const auto kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown model kind " + j.at("kind").dump());
  s.kind = *kind;
  if (j.contains("params"))
    for (auto& [k, v] : j.at("params").items()) s.params[k] = v.get<double>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.threshold = j.value("threshold", 0.5);
  return s;
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows, std::size_t arity) {
  Standardizer s;
  s.mean.assign(arity, 0.0);
  s.scale.assign(arity, 1.0);
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < arity; ++j) s.mean[j] += r[j];
  for (auto& m : s.mean) m /= n;
  std::vector<double> var(arity, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < arity; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  for (std::size_t j = 0; j < arity; ++j) {
    const double sd = std::sqrt(var[j] / n);
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
  return z;
}

double TrainedModel::score(std::span<const double> x) const {
  if (x.size() != arity())
    throw Error(ErrorCode::ArityMismatch, "model expects " + std::to_string(arity()) +
                                              " features, got " + std::to_string(x.size()));
  const auto z = standardizer_.apply(x);
  return fitted_->score(z);
}

int TrainedModel::predict(std::span<const double> x) const {
  return score(x) >= spec_.threshold ? 1 : 0;
}

std::vector<double> TrainedModel::scores(const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& r : data.rows) out.push_back(score(r));
  return out;
}

std::vector<int> TrainedModel::predictions(const Dataset& data) const {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& r : data.rows) out.push_back(predict(r));
  return out;
}

json TrainedModel::to_json() const {
  json j = json::object();
  j["format"] = "psytriage-model";
  j["version"] = kModelFormatVersion;
  j["spec"] = psytriage::to_json(spec_);
  j["feature_names"] = names_;
  j["standardizer"] = json{{"mean", standardizer_.mean}, {"scale", standardizer_.scale}};
  j["state"] = fitted_->state();
  return j;
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "psytriage-model")
      throw Error(ErrorCode::Parse, "not a psytriage model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::Parse, "unsupported model format version " + j.at("version").dump());
    ModelSpec spec = resolve(model_spec_from_json(j.at("spec")));
    Standardizer s{j.at("standardizer").at("mean").get<std::vector<double>>(),
                   j.at("standardizer").at("scale").get<std::vector<double>>()};
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    const auto& state = j.at("state");
    std::unique_ptr<detail::FittedModel> fitted;
    switch (spec.kind) {
      case ModelKind::SVM: fitted = detail::load_svm(state); break;
      case ModelKind::RF: fitted = detail::load_forest(state); break;
      case ModelKind::XGB: fitted = detail::load_boosting(state); break;
      case ModelKind::KNN: fitted = detail::load_knn(state); break;
      case ModelKind::NB: fitted = detail::load_naive_bayes(state); break;
      case ModelKind::LR: fitted = detail::load_logistic(state); break;
      case ModelKind::MLPC: fitted = detail::load_mlp(state); break;
    }
    if (s.mean.size() != names.size() || s.scale.size() != names.size())
      throw Error(ErrorCode::Parse, "standardizer size does not match feature names");
    return TrainedModel(std::move(spec), std::move(names), std::move(s), std::move(fitted));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model file: ") + e.what());
  }
}

TrainedModel train(const ModelSpec& spec, const Dataset& data) {
  data.check_shape();
  if (data.size() < 2 || !data.has_both_classes())
    throw Error(ErrorCode::SingleClassTraining,
                "training needs both classes (" + std::to_string(data.positives()) + " positive of " +
                    std::to_string(data.size()) + ")");
  ModelSpec resolved = resolve(spec);
  Standardizer s = Standardizer::fit(data.rows, data.arity());
  detail::Matrix z;
  z.reserve(data.size());
  for (const auto& r : data.rows) z.push_back(s.apply(r));
  const detail::FitInput in{z, data.rows, data.labels, s, resolved.params, resolved.seed};
  std::unique_ptr<detail::FittedModel> fitted;
  switch (resolved.kind) {
    case ModelKind::SVM: fitted = detail::fit_svm(in); break;
    case ModelKind::RF: fitted = detail::fit_forest(in); break;
    case ModelKind::XGB: fitted = detail::fit_boosting(in); break;
    case ModelKind::KNN: fitted = detail::fit_knn(in); break;
    case ModelKind::NB: fitted = detail::fit_naive_bayes(in); break;
    case ModelKind::LR: fitted = detail::fit_logistic(in); break;
    case ModelKind::MLPC: fitted = detail::fit_mlp(in); break;
  }
  return TrainedModel(std::move(resolved), data.feature_names, std::move(s), std::move(fitted));
}

namespace detail {

json tree_to_json(const Tree& t) {
  // columnar layout keeps model files compact
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

Tree tree_from_json(const json& j) {
  const auto f = j.at("feature").get<std::vector<int>>();
  const auto th = j.at("threshold").get<std::vector<double>>();
  const auto l = j.at("left").get<std::vector<int>>();
  const auto r = j.at("right").get<std::vector<int>>();
  const auto v = j.at("value").get<std::vector<double>>();
  if (f.empty() || th.size() != f.size() || l.size() != f.size() || r.size() != f.size() || v.size() != f.size())
    throw Error(ErrorCode::Parse, "malformed tree");
  Tree t;
  const int n = static_cast<int>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] >= 0 && (l[i] <= static_cast<int>(i) || r[i] <= static_cast<int>(i) || l[i] >= n || r[i] >= n))
      throw Error(ErrorCode::Parse, "tree child index out of range");
    t.nodes.push_back({f[i], th[i], l[i], r[i], v[i]});
  }
  return t;
}

}  // namespace detail

}  // namespace psytriage
