#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "psytriage/learners.hpp"
#include "psytriage/metrics.hpp"
#include "psytriage/rng.hpp"
#include "support.hpp"

using namespace psytriage;

TEST_CASE("MLP analytic gradient matches central differences") {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    mlp::Params p;
    p.inputs = 4;
    p.hidden = 6;
    p.w1.resize(p.inputs * p.hidden);
    p.b1.resize(p.hidden);
    p.w2.resize(p.hidden);
    for (auto& v : p.w1) v = rng.normal(0, 0.8);
    for (auto& v : p.b1) v = rng.normal(0, 0.5);
    for (auto& v : p.w2) v = rng.normal(0, 0.8);
    p.b2 = rng.normal(0, 0.5);
    std::vector<std::vector<double>> x(12, std::vector<double>(p.inputs));
    std::vector<int> y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (auto& v : x[i]) v = rng.normal();
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const double l2 = 0.01;
    mlp::Params g;
    mlp::loss_and_gradient(p, x, y, l2, &g);
    const auto analytic = g.flatten();
    auto flat = p.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double h = 1e-6;
      auto plus = flat, minus = flat;
      plus[k] += h;
      minus[k] -= h;
      mlp::Params pp = p, pm = p;
      pp.assign(plus);
      pm.assign(minus);
      const double numeric =
          (mlp::loss_and_gradient(pp, x, y, l2, nullptr) - mlp::loss_and_gradient(pm, x, y, l2, nullptr)) / (2 * h);
      CAPTURE(k);
      // ReLU kinks make a few coordinates non-differentiable; none is hit at these draws
      CHECK(std::abs(numeric - analytic[k]) <= 1e-4 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("MLP parameter vector length is checked") {
  mlp::Params p;
  p.inputs = 2;
  p.hidden = 3;
  p.w1.assign(6, 0);
  p.b1.assign(3, 0);
  p.w2.assign(3, 0);
  CHECK(p.flatten().size() == 6 + 3 + 3 + 1);
  CHECK_THROWS_AS(p.assign(std::vector<double>(5, 0.0)), Error);
}

TEST_CASE("XGB training loss never increases across rounds") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = testing::blobs(300, 5, 1.0, seed);
    for (double eta : {0.1, 0.3, 1.0}) {
      const auto model = train(ModelSpec{ModelKind::XGB, {{"n_rounds", 40}, {"eta", eta}}, seed, 0.5}, data);
      const auto trace = model.training_trace();
      REQUIRE(trace.size() == 41);
      for (std::size_t r = 1; r < trace.size(); ++r) CHECK(trace[r] <= trace[r - 1] + 1e-12);
    }
  }
}

TEST_CASE("KNN agrees with an exhaustive neighbour scan") {
  const auto data = testing::blobs(200, 3, 1.0, 17);
  Rng rng(99);
  for (std::size_t k : {1u, 5u, 11u}) {
    const auto model = train(ModelSpec{ModelKind::KNN, {{"k", static_cast<double>(k)}}, 0, 0.5}, data);
    const auto& st = model.standardizer();
    for (int q = 0; q < 50; ++q) {
      std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < data.size(); ++i) {
        double d = 0;
        for (std::size_t j = 0; j < 3; ++j) {
          const double a = (data.rows[i][j] - st.mean[j]) / st.scale[j];
          const double b = (x[j] - st.mean[j]) / st.scale[j];
          d += (a - b) * (a - b);
        }
        all.emplace_back(d, i);
      }
      std::sort(all.begin(), all.end());
      double pos = 0;
      for (std::size_t i = 0; i < k; ++i) pos += data.labels[all[i].second];
      CHECK(model.score(x) == doctest::Approx(pos / static_cast<double>(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("standardizer uses population statistics") {
  const auto s = Standardizer::fit({{1, 5}, {3, 5}}, 2);
  CHECK(s.mean == std::vector<double>{2, 5});
  CHECK(s.scale == std::vector<double>{1, 1});
}

TEST_CASE("every model learns separable data and round-trips through JSON") {
  const auto data = testing::blobs(240, 3, 4.0, 5);
  const auto test = testing::blobs(200, 3, 4.0, 6);
  for (auto kind : kAllModelKinds) {
    CAPTURE(model_name(kind));
    ModelSpec spec{kind, {}, 7, 0.5};
    if (kind == ModelKind::RF) spec.params["n_trees"] = 30;
    const auto model = train(spec, data);
    const auto cm = confusion(test.labels, model.predictions(test));
    CHECK(*metrics(cm).accuracy > 0.9);
    for (double s : model.scores(test)) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    const auto back = TrainedModel::from_json(model.to_json());
    CHECK(back.scores(test) == model.scores(test));
    CHECK(back.to_json().dump() == model.to_json().dump());
  }
}

TEST_CASE("training is deterministic for equal seeds") {
  const auto data = testing::blobs(150, 4, 1.5, 9);
  for (auto kind : kAllModelKinds) {
    ModelSpec spec{kind, {}, 3, 0.5};
    if (kind == ModelKind::RF) spec.params["n_trees"] = 20;
    CHECK(train(spec, data).to_json().dump() == train(spec, data).to_json().dump());
  }
}

TEST_CASE("hyperparameters are validated") {
  CHECK_THROWS_AS(resolve(ModelSpec{ModelKind::KNN, {{"k", 0}}, 0, 0.5}), Error);
  CHECK_THROWS_AS(resolve(ModelSpec{ModelKind::KNN, {{"k", 2.5}}, 0, 0.5}), Error);
  CHECK_THROWS_AS(resolve(ModelSpec{ModelKind::LR, {{"depth", 1}}, 0, 0.5}), Error);
  const auto r = resolve(ModelSpec{ModelKind::XGB, {}, 0, 0.5});
  CHECK(r.params.at("eta") == 0.3);
  CHECK(parse_model_kind("ann") == ModelKind::MLPC);
  CHECK(parse_model_kind("knn") == ModelKind::KNN);
  CHECK(!parse_model_kind("gbm"));
}

TEST_CASE("training errors") {
  auto data = testing::blobs(20, 2, 1.0, 1);
  std::fill(data.labels.begin(), data.labels.end(), 1);
  CHECK_THROWS_AS(train(ModelSpec{}, data), Error);
  const auto ok = train(ModelSpec{}, testing::blobs(20, 2, 1.0, 1));
  CHECK_THROWS_AS(ok.score(std::vector<double>{1.0}), Error);
}
