#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "psytriage/featselect.hpp"
#include "psytriage/ingest.hpp"
#include "psytriage/learners.hpp"
#include "psytriage/llm.hpp"
#include "psytriage/synthgen.hpp"
#include "psytriage/textfeat.hpp"
#include "psytriage/tuning.hpp"

namespace psytriage {

/// Error raised by run_pipeline, tagged with the failing stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr std::string_view kNoiseProbe = "noise_probe";

// ---------------------------------------------------------------------------
// Stage building blocks shared by the pipeline and the CLI

std::vector<WordCount> corpus_word_count(const std::vector<RescueRecord>& records, const Lexicon& lexicon,
                                         std::size_t min_count);
std::string format_word_count_csv(const std::vector<WordCount>& counts);

/// Records without a complete set of vitals are skipped.
std::vector<CaseFeatures> extract_all(const std::vector<RescueRecord>& records, const Lexicon& lexicon);

/// The five vitals plus the selected text features, in feature-vector order.
std::vector<std::string> model_feature_names(const SelectionReport& selection);

struct TunedModel {
  ModelSpec spec;
  SearchResult search;
};

struct TuningOutcome {
  std::vector<std::string> feature_names;
  std::vector<TunedModel> models;  // in menu order
  std::size_t best = 0;            // index of the highest mean CV accuracy (ties: menu order)
};

struct TuningOptions {
  std::vector<ModelKind> models{kAllModelKinds.begin(), kAllModelKinds.end()};
  SearchMode mode = SearchMode::Grid;
  std::size_t budget = 10;
  CvSpec cv;
  std::uint64_t seed = 0;
  /// Per-model search spaces replacing the defaults.
  std::map<ModelKind, SearchSpec> spaces;
};

TuningOutcome tune_models(const Dataset& train, const TuningOptions& options);
json to_json(const TuningOutcome& t);
TuningOutcome tuning_outcome_from_json(const json& j);

/// Appends a seeded label-independent column named noise_probe.
Dataset with_noise_probe(const Dataset& data, std::uint64_t seed);

/// Up to `per_class` psychiatric and `per_class` non-psychiatric rows, in order.
std::vector<std::size_t> pick_llm_cases(const std::vector<int>& labels, std::size_t per_class);

// ---------------------------------------------------------------------------
// End-to-end run

struct LlmStageConfig {
  bool enabled = false;
  EndpointConfig endpoint;
  std::optional<std::filesystem::path> stub_transcript;  // serve replies locally instead
  std::size_t cases_per_class = 3;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "psytriage-out";
  std::optional<std::filesystem::path> lexicon;           // built-in when absent
  std::optional<std::filesystem::path> generator_config;  // desk default when absent
  std::vector<std::filesystem::path> input_tables;        // ingest these instead of generating
  std::optional<std::filesystem::path> ingest_config;
  std::optional<std::filesystem::path> search_config;     // {"<model>": SearchSpec, ...}
  std::size_t wordcount_min = 50;
  double select_threshold = 3.0;
  ZeroReferencePolicy zero_reference = ZeroReferencePolicy::Select;
  std::vector<ModelKind> models{kAllModelKinds.begin(), kAllModelKinds.end()};
  SearchMode search_mode = SearchMode::Grid;
  std::size_t search_budget = 10;
  std::size_t folds = 5;
  bool stratified = true;
  double split_ratio = 0.8;
  std::optional<std::filesystem::path> metrics_csv;  // default out_dir/metrics.csv
  std::optional<std::filesystem::path> roc_dir;      // default out_dir/roc
  std::size_t permutation_repeats = 5;
  std::size_t oracle_draws = 200000;
  LlmStageConfig llm;
  unsigned workers = 0;  // 0 = hardware threads
};

json to_json(const PipelineConfig& c);
/// Relative paths are resolved against base_dir.
PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir = {});

struct StageRecord {
  std::string name;
  std::string status;  // ok, skipped, failed
  std::string message;
  std::vector<std::filesystem::path> outputs;  // relative to out_dir
};

struct PipelineResult {
  std::vector<StageRecord> stages;
  json manifest;
  bool ok() const;
};

/// Checks that every referenced path exists. Throws StageError naming the
/// first stage that would read the missing file.
void check_pipeline_paths(const PipelineConfig& cfg);

/// Runs synth|ingest, wordcount, extract-features, select-features, tune,
/// rfecv, evaluate and llm-compare, writing artifacts and manifest.json to
/// cfg.out_dir. Stops at the first failing stage (after writing the manifest)
/// and throws StageError.
PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::function<void(std::string_view)>& progress = {});

/// Stage names accepted by run_stage.
const std::vector<std::string>& pipeline_stage_names();

/// Runs one stage. Inputs produced by earlier stages are read from
/// cfg.out_dir. No manifest is written.
StageRecord run_stage(const PipelineConfig& cfg, std::string_view name,
                      const std::function<void(std::string_view)>& progress = {});

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace psytriage
