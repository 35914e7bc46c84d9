#pragma once

#include <optional>
#include <span>
#include <vector>

#include "psytriage/core.hpp"

namespace psytriage {

/// Throws LengthMismatch. Labels and predictions are 0/1.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

/// Ratios with a zero denominator are left empty rather than reported as 0.
struct ScalarMetrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f1;
};

ScalarMetrics metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score >= threshold is called positive; +inf for the origin
};

struct RocCurve {
  double auc = 0.0;
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
};

/// ROC by sweeping every distinct score, AUC by the trapezoid rule (tied
/// scores count one half). Throws LengthMismatch, SingleClass.
RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores);

struct MetricsReport {
  ConfusionMatrix confusion;
  ScalarMetrics scalars;
  std::optional<double> auc;  // empty when the data has a single class
  std::vector<RocPoint> roc_points;
};

MetricsReport metrics_report(std::span<const int> y_true, std::span<const double> scores, double threshold);

}  // namespace psytriage
