#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"
#include "psytriage/rng.hpp"
#include "psytriage/textfeat.hpp"

namespace psytriage {

/// Normal distribution rounded to integers and truncated to [min, max].
struct DiscreteNormal {
  double mean = 0.0;
  double sd = 1.0;
  double min = 0.0;
  double max = 0.0;

  /// Probability of the integer v.
  double pmf(double v) const;
  double draw(Rng& rng) const;
};

struct ClassProfile {
  DiscreteNormal systolic_bp;
  DiscreteNormal respiratory_rate;
  DiscreteNormal gcs;
  double circulation_normal = 0.8;    // P(normal)
  double pulse_rhythm_regular = 0.8;  // P(regular)
  /// P(a keyword of the category is written into the notes), by Category.
  std::array<double, kCategoryCount> keyword{};
};

struct GeneratorConfig {
  std::size_t n_psychiatric = 0;
  std::size_t n_nonpsychiatric = 0;
  ClassProfile psychiatric;
  ClassProfile non_psychiatric;
  /// P(an injected keyword is written negated, e.g. "denies alcohol").
  double negation_probability = 0.0;
  /// Mean number of filler words per record.
  double noise_tokens = 0.0;
  std::uint64_t seed = 0;

  /// Desk-scale default: 10,220 / 8,758 cases times `scale`, strong
  /// psychiatric-symptom signal, weak preillness signal, overlapping vitals.
  static GeneratorConfig desk(double scale = 0.1);
  /// Throws InvalidConfig.
  void validate() const;
};

json to_json(const GeneratorConfig& cfg);
/// Missing keys keep the desk defaults.
GeneratorConfig generator_config_from_json(const json& j);

struct GeneratedCase {
  RescueRecord record;
  std::array<bool, kCategoryCount> injected{};
  std::array<bool, kCategoryCount> negated{};
};

/// Deterministic in cfg.seed; record i uses its own derived stream.
/// Keywords are drawn from those the lexicon assigns to a single category.
std::vector<GeneratedCase> generate_cases(const GeneratorConfig& cfg, const Lexicon& lexicon = default_lexicon());
std::vector<RescueRecord> generate(const GeneratorConfig& cfg, const Lexicon& lexicon = default_lexicon());

/// case_id, label, the five vitals, then <category>_injected and
/// <category>_negated per category.
std::string format_truth_csv(const std::vector<GeneratedCase>& cases);

struct OracleEstimate {
  double accuracy = 0.0;
  double standard_error = 0.0;
  std::size_t draws = 0;
};

/// Monte-Carlo mean of max_c P(c | x) over x drawn from the generator, using
/// the exact generative likelihoods of the observable features.
OracleEstimate oracle_accuracy(const GeneratorConfig& cfg, std::size_t draws = 200000);

/// Label-independent standard-normal column used as a planted irrelevant feature.
std::vector<double> noise_probe(std::size_t n, std::uint64_t seed);

}  // namespace psytriage
