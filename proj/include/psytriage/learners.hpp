#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"

namespace psytriage {

enum class ModelKind { SVM, RF, XGB, KNN, NB, LR, MLPC };

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::SVM, ModelKind::RF, ModelKind::XGB, ModelKind::KNN,
    ModelKind::NB,  ModelKind::LR, ModelKind::MLPC};

/// Table-style display name: SVM, RF, XGB, K-NN, NB, LR, MLPC.
std::string_view model_name(ModelKind kind);
/// Accepts display names plus KNN and ANN (read as MLPC), case-insensitive.
std::optional<ModelKind> parse_model_kind(std::string_view text);

using Hyperparameters = std::map<std::string, double>;

struct ModelSpec {
  ModelKind kind = ModelKind::LR;
  Hyperparameters params;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ParamSchema {
  std::string name;
  double default_value;
  double min;
  double max;
  bool integer;
  bool min_exclusive;  // value must be > min rather than >= min
};

const std::vector<ParamSchema>& param_schema(ModelKind kind);

/// Fills defaults and validates every value against the kind's schema.
/// Throws InvalidHyperparameter for unknown names or out-of-range values.
ModelSpec resolve(const ModelSpec& spec);

json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j);

/// Per-feature z-score parameters learned from training rows only. Constant
/// columns get scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows, std::size_t arity);
  std::vector<double> apply(std::span<const double> x) const;
  double apply(std::size_t j, double v) const { return (v - mean[j]) / scale[j]; }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

namespace detail {

/// Fitted state of one model kind. Operates on standardized inputs.
class FittedModel {
 public:
  virtual ~FittedModel() = default;
  /// Probability-like score in [0, 1].
  virtual double score(std::span<const double> z) const = 0;
  virtual json state() const = 0;
  virtual std::vector<double> trace() const { return {}; }
};

}  // namespace detail

/// Immutable fitted classifier. Cheap to copy; copies share the fitted state.
class TrainedModel {
 public:
  const ModelSpec& spec() const { return spec_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const Standardizer& standardizer() const { return standardizer_; }
  std::size_t arity() const { return names_.size(); }

  /// Score in [0, 1]; throws ArityMismatch.
  double score(std::span<const double> x) const;
  /// 1 iff score(x) >= spec().threshold.
  int predict(std::span<const double> x) const;

  std::vector<double> scores(const Dataset& data) const;
  std::vector<int> predictions(const Dataset& data) const;

  /// Per-round training loss for XGB (round 0 = base margin); empty otherwise.
  std::vector<double> training_trace() const { return fitted_->trace(); }

  json to_json() const;
  static TrainedModel from_json(const json& j);

 private:
  friend TrainedModel train(const ModelSpec& spec, const Dataset& data);
  TrainedModel(ModelSpec spec, std::vector<std::string> names, Standardizer s,
               std::shared_ptr<const detail::FittedModel> fitted)
      : spec_(std::move(spec)), names_(std::move(names)), standardizer_(std::move(s)),
        fitted_(std::move(fitted)) {}

  ModelSpec spec_;
  std::vector<std::string> names_;
  Standardizer standardizer_;
  std::shared_ptr<const detail::FittedModel> fitted_;
};

/// Deterministic given (spec, data). Throws SingleClassTraining,
/// InvalidHyperparameter, LengthMismatch, ArityMismatch.
TrainedModel train(const ModelSpec& spec, const Dataset& data);

inline constexpr int kModelFormatVersion = 1;

namespace mlp {

/// One hidden ReLU layer, sigmoid output.
struct Params {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Output probability for one input.
double forward(const Params& p, std::span<const double> x);

/// Mean binary cross-entropy over the batch plus (l2 / 2) * ||weights||^2
/// (biases unpenalized). Writes the analytic gradient when grad is non-null.
double loss_and_gradient(const Params& p, const std::vector<std::vector<double>>& x,
                         std::span<const int> y, double l2, Params* grad);

}  // namespace mlp

}  // namespace psytriage
