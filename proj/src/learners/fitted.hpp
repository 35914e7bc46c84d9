#pragma once

// Internal factory functions for each model kind. All operate on standardized
// rows; `raw` is available for kinds that need the original encoding.

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "psytriage/learners.hpp"

namespace psytriage::detail {

using Matrix = std::vector<std::vector<double>>;

struct FitInput {
  const Matrix& z;    // standardized rows
  const Matrix& raw;  // original rows
  std::span<const int> y;
  const Standardizer& standardizer;
  const Hyperparameters& params;  // resolved, all schema keys present
  std::uint64_t seed;
};

std::unique_ptr<FittedModel> fit_knn(const FitInput& in);
std::unique_ptr<FittedModel> fit_naive_bayes(const FitInput& in);
std::unique_ptr<FittedModel> fit_logistic(const FitInput& in);
std::unique_ptr<FittedModel> fit_svm(const FitInput& in);
std::unique_ptr<FittedModel> fit_forest(const FitInput& in);
std::unique_ptr<FittedModel> fit_boosting(const FitInput& in);
std::unique_ptr<FittedModel> fit_mlp(const FitInput& in);

std::unique_ptr<FittedModel> load_knn(const json& state);
std::unique_ptr<FittedModel> load_naive_bayes(const json& state);
std::unique_ptr<FittedModel> load_logistic(const json& state);
std::unique_ptr<FittedModel> load_svm(const json& state);
std::unique_ptr<FittedModel> load_forest(const json& state);
std::unique_ptr<FittedModel> load_boosting(const json& state);
std::unique_ptr<FittedModel> load_mlp(const json& state);

inline double sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// Binary decision tree shared by the forest and the booster.

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // class vote (forest) or leaf weight (booster)
};

struct Tree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> z) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = z[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

json tree_to_json(const Tree& t);
Tree tree_from_json(const json& j);

}  // namespace psytriage::detail
