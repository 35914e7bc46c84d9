#include <doctest.h>

#include <cmath>

#include "psytriage/synthgen.hpp"
#include "psytriage/textfeat.hpp"

using namespace psytriage;

TEST_CASE("discrete normal: mass sums to one and matches draws") {
  const DiscreteNormal d{14.2, 1.6, 3, 15};
  double total = 0, mean = 0;
  for (int v = 3; v <= 15; ++v) {
    total += d.pmf(v);
    mean += v * d.pmf(v);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.pmf(16) == 0.0);
  CHECK(d.pmf(2) == 0.0);
  Rng rng(1);
  double sample = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = d.draw(rng);
    CHECK_FALSE((x < 3 || x > 15 || x != std::round(x)));
    sample += x;
  }
  CHECK(std::abs(sample / n - mean) < 0.02);
}

TEST_CASE("generator is deterministic and sized by the config") {
  auto cfg = GeneratorConfig::desk(0.01);
  cfg.seed = 5;
  const auto a = generate_cases(cfg);
  const auto b = generate_cases(cfg);
  CHECK(a.size() == cfg.n_psychiatric + cfg.n_nonpsychiatric);
  std::size_t psy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].record == b[i].record);
    psy += a[i].record.label == Label::Psychiatric;
  }
  CHECK(psy == cfg.n_psychiatric);
  cfg.seed = 6;
  CHECK(generate(cfg)[0] != a[0].record);
}

TEST_CASE("injected keywords are recovered by the extractor") {
  auto cfg = GeneratorConfig::desk(0.05);
  cfg.seed = 9;
  const auto cases = generate_cases(cfg);
  std::size_t checked = 0;
  for (const auto& c : cases) {
    const auto f = extract_features(c.record, default_lexicon());
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      const bool expect = c.injected[k] && !c.negated[k];
      CHECK(f.slots[k].has_value() == expect);
      ++checked;
    }
  }
  CHECK(checked == cases.size() * kCategoryCount);
}

TEST_CASE("config validation and JSON") {
  auto cfg = GeneratorConfig::desk();
  CHECK(cfg.n_psychiatric == 1022);
  CHECK(cfg.n_nonpsychiatric == 876);
  cfg.psychiatric.gcs.min = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GeneratorConfig::desk();
  cfg.negation_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  const auto back = generator_config_from_json(to_json(GeneratorConfig::desk()));
  CHECK(to_json(back) == to_json(GeneratorConfig::desk()));
}

TEST_CASE("oracle accuracy is a valid probability and is seed-stable") {
  auto cfg = GeneratorConfig::desk();
  const auto a = oracle_accuracy(cfg, 20000);
  CHECK(a.accuracy > 0.5);
  CHECK(a.accuracy < 1.0);
  CHECK(a.draws == 20000);
  const auto b = oracle_accuracy(cfg, 20000);
  CHECK(a.accuracy == b.accuracy);

  // identical classes: nothing beats the majority prior
  auto flat = cfg;
  flat.non_psychiatric = flat.psychiatric;
  const auto f = oracle_accuracy(flat, 20000);
  const double prior = static_cast<double>(cfg.n_psychiatric) / static_cast<double>(cfg.n_psychiatric + cfg.n_nonpsychiatric);
  CHECK(f.accuracy == doctest::Approx(prior).epsilon(1e-9));
}

TEST_CASE("noise probe is standard normal and seeded") {
  const auto a = noise_probe(50000, 3);
  CHECK(a == noise_probe(50000, 3));
  double m = 0, v = 0;
  for (double x : a) m += x;
  m /= static_cast<double>(a.size());
  for (double x : a) v += (x - m) * (x - m);
  v /= static_cast<double>(a.size());
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(v - 1) < 0.03);
}
