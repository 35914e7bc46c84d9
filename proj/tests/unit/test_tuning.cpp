#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "psytriage/tuning.hpp"
#include "support.hpp"

using namespace psytriage;

TEST_CASE("folds partition the rows and stratify by label") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.below(90);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.bernoulli(0.3) ? 1 : 0;
    const std::size_t k = 2 + rng.below(std::min<std::size_t>(9, n - 1));
    const auto folds = make_folds(y, CvSpec{k, true, rng.next()});
    REQUIRE(folds.size() == k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0, plo = n, phi = 0;
    for (const auto& f : folds) {
      CHECK(std::is_sorted(f.begin(), f.end()));
      std::size_t pos = 0;
      for (auto i : f) {
        ++seen[i];
        pos += static_cast<std::size_t>(y[i]);
      }
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      plo = std::min(plo, pos);
      phi = std::max(phi, pos);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(hi - lo <= 1);
    CHECK(phi - plo <= 1);
  }
  CHECK_THROWS_AS(make_folds(std::vector<int>{0, 1}, CvSpec{3, true, 0}), Error);
  CHECK_THROWS_AS(make_folds(std::vector<int>{0, 1}, CvSpec{1, true, 0}), Error);
}

TEST_CASE("cross-validation equals a hand-rolled fold loop") {
  const auto data = testing::blobs(60, 2, 1.0, 3);
  const ModelSpec spec{ModelKind::LR, {}, 0, 0.5};
  const auto folds = make_folds(data.labels, CvSpec{5, false, 8});
  const auto cv = cross_validate(spec, data, folds);
  double sum = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> tr;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!std::binary_search(folds[f].begin(), folds[f].end(), i)) tr.push_back(i);
    const auto model = train(spec, data.select_rows(tr));
    const auto va = data.select_rows(folds[f]);
    const auto pred = model.predictions(va);
    double correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == va.labels[i];
    const double acc = correct / static_cast<double>(pred.size());
    CHECK(cv.fold_scores[f] == doctest::Approx(acc).epsilon(1e-15));
    sum += acc;
  }
  CHECK(cv.mean == doctest::Approx(sum / 5).epsilon(1e-15));
}

TEST_CASE("leave-one-out works and degenerate training folds are rejected") {
  const auto data = testing::blobs(12, 2, 3.0, 1);
  const auto loo = cross_validate(ModelSpec{ModelKind::NB, {}, 0, 0.5}, data, CvSpec{12, false, 0});
  CHECK(loo.fold_scores.size() == 12);
  for (double s : loo.fold_scores) CHECK((s == 0.0 || s == 1.0));

  // one positive: the fold holding it leaves a single-class training set
  Dataset tiny = testing::blobs(6, 1, 1.0, 2);
  tiny.labels = {1, 0, 0, 0, 0, 0};
  try {
    cross_validate(ModelSpec{}, tiny, CvSpec{3, false, 0});
    FAIL("expected DegenerateFolds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFolds);
  }
}

TEST_CASE("train/test split sizes and disjointness") {
  const auto data = testing::blobs(101, 2, 1.0, 1);
  const auto s = split_train_test(data, 0.8, 5, true);
  CHECK(s.train.size() + s.test.size() == 101);
  std::vector<std::size_t> all = s.train_index;
  all.insert(all.end(), s.test_index.begin(), s.test_index.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(101);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  // per-class rounding: 51 positives -> 41, 50 negatives -> 40
  CHECK(s.train.positives() == 41);
  CHECK(s.train.size() == 81);
  CHECK_THROWS_AS(split_train_test(data, 1.0, 1), Error);
  const auto again = split_train_test(data, 0.8, 5, true);
  CHECK(again.test_index == s.test_index);
}

TEST_CASE("grid search enumerates the product in key order") {
  const auto data = testing::blobs(80, 2, 1.5, 4);
  SearchSpec spec;
  spec.space["k"].values = {1, 3, 5, 7};
  const auto r = search(ModelSpec{ModelKind::KNN, {}, 0, 0.5}, spec, CvSpec{4, true, 1}, data);
  REQUIRE(r.leaderboard.size() == 4);
  for (std::size_t i = 1; i < r.leaderboard.size(); ++i) {
    const auto& a = r.leaderboard[i - 1];
    const auto& b = r.leaderboard[i];
    CHECK((a.cv.mean > b.cv.mean || (a.cv.mean == b.cv.mean && a.order < b.order)));
  }
  for (const auto& row : r.leaderboard) CHECK(row.params.at("k") == 1 + 2 * static_cast<double>(row.order));
  CHECK(r.best.params.at("k") == r.leaderboard.front().params.at("k"));
}

TEST_CASE("random search with a full budget finds the grid winner") {
  const auto data = testing::blobs(90, 3, 1.0, 12);
  SearchSpec grid;
  grid.space["lambda"].values = {1e-4, 1e-2, 1.0};
  grid.space["epochs"].values = {5, 20};
  const ModelSpec base{ModelKind::SVM, {}, 2, 0.5};
  const CvSpec cv{3, true, 6};
  const auto g = search(base, grid, cv, data);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SearchSpec random = grid;
    random.mode = SearchMode::Random;
    random.budget = 6;
    random.seed = seed;
    const auto r = search(base, random, cv, data);
    CHECK(r.leaderboard.size() == 6);
    CHECK(r.best == g.best);
  }
}

TEST_CASE("random search draws from ranges") {
  const auto data = testing::blobs(60, 2, 1.0, 2);
  SearchSpec s;
  s.mode = SearchMode::Random;
  s.budget = 5;
  s.seed = 3;
  s.space["lambda"].low = 1e-4;
  s.space["lambda"].high = 1e-1;
  s.space["lambda"].log_scale = true;
  const auto r = search(ModelSpec{ModelKind::LR, {}, 0, 0.5}, s, CvSpec{3, true, 1}, data);
  CHECK(r.leaderboard.size() == 5);
  for (const auto& row : r.leaderboard) {
    CHECK(row.params.at("lambda") >= 1e-4);
    CHECK(row.params.at("lambda") <= 1e-1);
  }
  SearchSpec grid_with_range = s;
  grid_with_range.mode = SearchMode::Grid;
  CHECK_THROWS_AS(search(ModelSpec{ModelKind::LR, {}, 0, 0.5}, grid_with_range, CvSpec{3, true, 1}, data), Error);
  CHECK_THROWS_AS(search(ModelSpec{ModelKind::LR, {}, 0, 0.5}, SearchSpec{}, CvSpec{3, true, 1}, data), Error);
}

TEST_CASE("search spec JSON forms") {
  const auto s = search_spec_from_json(json::parse(
      R"({"mode": "random", "budget": 4, "space": {"k": [3, 5], "lambda": {"low": 0.001, "high": 1, "log": true}, "epochs": 10}})"));
  CHECK(s.mode == SearchMode::Random);
  CHECK(s.budget == 4);
  CHECK(s.space.at("k").values == std::vector<double>{3, 5});
  CHECK(s.space.at("lambda").log_scale);
  CHECK(s.space.at("epochs").values == std::vector<double>{10});
}

TEST_CASE("metrics table shape") {
  const auto train_set = testing::blobs(200, 2, 2.0, 1);
  const auto test = testing::blobs(100, 2, 2.0, 2);
  std::vector<ModelSpec> specs;
  for (auto k : kAllModelKinds) {
    ModelSpec s{k, {}, 1, 0.5};
    if (k == ModelKind::RF) s.params["n_trees"] = 20;
    specs.push_back(s);
  }
  const auto rows = evaluate_all(specs, train_set, test);
  const auto table = format_metrics_table(rows);
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);
  CHECK(line == "model,accuracy,sensitivity,specificity,precision,f1");
  // same layout as a reference row such as "RF,89.27,89.44,89.07,90.59,90.01"
  const std::regex row(R"(^(SVM|RF|XGB|K-NN|NB|LR|MLPC)(,(\d{1,3}\.\d{2}|NA)){5}$)");
  CHECK(std::regex_match(std::string("RF,89.27,89.44,89.07,90.59,90.01"), row));
  std::set<std::string> models;
  double prev = 101;
  int n = 0;
  while (std::getline(in, line)) {
    CAPTURE(line);
    CHECK(std::regex_match(line, row));
    models.insert(line.substr(0, line.find(',')));
    const double acc = std::stod(line.substr(line.find(',') + 1));
    CHECK(acc <= prev);
    prev = acc;
    ++n;
  }
  CHECK(n == 7);
  CHECK(models.size() == 7);
  // determinism
  CHECK(format_metrics_table(evaluate_all(specs, train_set, test)) == table);
}

TEST_CASE("failed rows report NA and sort last") {
  const auto train_set = testing::blobs(40, 2, 2.0, 1);
  const auto test = testing::blobs(20, 2, 2.0, 2);
  const std::vector<ModelSpec> specs{ModelSpec{ModelKind::KNN, {{"k", -1}}, 0, 0.5}, ModelSpec{ModelKind::LR, {}, 0, 0.5}};
  const auto rows = evaluate_all(specs, train_set, test);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].spec.kind == ModelKind::LR);
  CHECK(!rows[1].report);
  CHECK(!rows[1].error.empty());
  const auto table = format_metrics_table(rows);
  CHECK(table.find("K-NN,NA,NA,NA,NA,NA") != std::string::npos);
  CHECK(format_percent(0.8927) == "89.27");
  CHECK(format_percent(std::nullopt) == "NA");
}

TEST_CASE("ROC files are written per model") {
  const auto train_set = testing::blobs(60, 2, 2.0, 1);
  const auto test = testing::blobs(40, 2, 2.0, 2);
  const auto rows = evaluate_all({ModelSpec{ModelKind::KNN, {}, 0, 0.5}}, train_set, test);
  const auto dir = std::filesystem::temp_directory_path() / "psytriage_roc_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_roc_files(dir, rows);
  std::ifstream in(dir / "roc_k_nn.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "fpr,tpr,threshold");
  std::filesystem::remove_all(dir);
}
