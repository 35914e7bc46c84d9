#include <doctest.h>

#include <limits>

#include "psytriage/metrics.hpp"
#include "psytriage/rng.hpp"

using namespace psytriage;

TEST_CASE("scalar metrics: hand-computed confusion") {
  const ConfusionMatrix cm{2, 1, 3, 0};  // tp fp tn fn
  const auto m = metrics(cm);
  CHECK(std::abs(*m.accuracy - 5.0 / 6.0) < 1e-12);
  CHECK(std::abs(*m.sensitivity - 1.0) < 1e-12);
  CHECK(std::abs(*m.specificity - 0.75) < 1e-12);
  CHECK(std::abs(*m.precision - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(*m.f1 - 0.8) < 1e-12);
}

TEST_CASE("confusion counts predictions against labels") {
  const std::vector<int> y{1, 1, 0, 0, 1, 0};
  const std::vector<int> p{1, 0, 0, 1, 1, 0};
  const auto cm = confusion(y, p);
  CHECK(cm == ConfusionMatrix{2, 1, 2, 1});
  CHECK_THROWS_AS(confusion(y, std::vector<int>{1}), Error);
}

TEST_CASE("perfect predictor yields all ones") {
  const std::vector<int> y{1, 0, 1, 1, 0};
  const auto m = metrics(confusion(y, y));
  CHECK(*m.accuracy == 1.0);
  CHECK(*m.sensitivity == 1.0);
  CHECK(*m.specificity == 1.0);
  CHECK(*m.precision == 1.0);
  CHECK(*m.f1 == 1.0);
}

TEST_CASE("undefined ratios stay empty") {
  const auto no_pos_pred = metrics(ConfusionMatrix{0, 0, 4, 2});
  CHECK(!no_pos_pred.precision);
  CHECK(!no_pos_pred.f1);
  CHECK(*no_pos_pred.sensitivity == 0.0);
  const auto no_neg = metrics(ConfusionMatrix{3, 0, 0, 1});
  CHECK(!no_neg.specificity);
  const auto empty = metrics(ConfusionMatrix{});
  CHECK(!empty.accuracy);
}

TEST_CASE("F1 is the harmonic mean of precision and sensitivity") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const ConfusionMatrix cm{rng.below(30), rng.below(30), rng.below(30), rng.below(30)};
    const auto m = metrics(cm);
    if (!m.precision || !m.sensitivity || *m.precision + *m.sensitivity == 0) {
      CHECK(!m.f1);
      continue;
    }
    const double h = 2 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
    CHECK(std::abs(*m.f1 - h) <= 1e-12);
  }
}

namespace {

// Probability that a random positive outscores a random negative, ties half.
double mann_whitney(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) wins += 0.5;
    }
  return wins / pairs;
}

}  // namespace

TEST_CASE("ROC AUC equals the Mann-Whitney statistic") {
  Rng rng(2024);
  int checked = 0;
  while (checked < 500) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<int> y(n);
    std::vector<double> s(n);
    // coarse scores so ties are common
    const std::uint64_t levels = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
      s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    }
    const bool both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
    if (!both) {
      CHECK_THROWS_AS(roc_auc(y, s), Error);
      continue;
    }
    const auto roc = roc_auc(y, s);
    CHECK(std::abs(roc.auc - mann_whitney(y, s)) <= 1e-12);
    REQUIRE(roc.points.size() >= 2);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.front().threshold == std::numeric_limits<double>::infinity());
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
    ++checked;
  }
}

TEST_CASE("metrics report thresholds scores") {
  const std::vector<int> y{1, 1, 0, 0};
  const std::vector<double> s{0.9, 0.4, 0.6, 0.1};
  const auto r = metrics_report(y, s, 0.5);
  CHECK(r.confusion == ConfusionMatrix{1, 1, 1, 1});
  CHECK(*r.auc == doctest::Approx(0.75));
  const auto single = metrics_report(std::vector<int>{1, 1}, std::vector<double>{0.3, 0.7}, 0.5);
  CHECK(!single.auc);
}
