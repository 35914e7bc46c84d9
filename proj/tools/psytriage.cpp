// Command-line front end for the psytriage pipeline.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

#include "psytriage/pipeline.hpp"

namespace fs = std::filesystem;
using namespace psytriage;

namespace {

struct Options {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out_dir;
  std::optional<unsigned> workers;
  bool verbose = false;
  bool quiet = false;

  // stage overrides
  std::optional<fs::path> lexicon;
  std::optional<fs::path> generator_config;
  std::optional<double> scale;
  std::vector<fs::path> tables;
  std::optional<fs::path> ingest_config;
  std::optional<std::size_t> wordcount_min;
  std::optional<double> threshold;
  std::optional<std::string> zero_reference;
  std::vector<std::string> models;
  std::optional<std::string> search_mode;
  std::optional<std::size_t> budget;
  std::optional<fs::path> search_config;
  std::optional<std::size_t> folds;
  std::optional<bool> stratified;
  std::optional<double> split;
  std::optional<fs::path> table_out;
  std::optional<fs::path> roc_dir;
  std::optional<std::size_t> repeats;
  std::optional<std::size_t> oracle_draws;
  std::optional<std::string> llm_url;
  std::optional<std::string> llm_model;
  std::optional<fs::path> stub_transcript;
  std::optional<std::size_t> llm_cases;
};

PipelineConfig build_config(const Options& o) {
  PipelineConfig cfg;
  if (o.config) cfg = pipeline_config_from_json(read_json_file(*o.config), o.config->parent_path());
  if (o.seed) cfg.seed = *o.seed;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.workers) cfg.workers = *o.workers;
  if (o.lexicon) cfg.lexicon = o.lexicon;
  if (o.generator_config) cfg.generator_config = o.generator_config;
  if (!o.tables.empty()) cfg.input_tables = o.tables;
  if (o.ingest_config) cfg.ingest_config = o.ingest_config;
  if (o.wordcount_min) cfg.wordcount_min = *o.wordcount_min;
  if (o.threshold) cfg.select_threshold = *o.threshold;
  if (o.zero_reference) cfg.zero_reference = *o.zero_reference == "reject" ? ZeroReferencePolicy::Reject
                                                                           : ZeroReferencePolicy::Select;
  if (!o.models.empty()) {
    cfg.models.clear();
    for (const auto& m : o.models) {
      const auto kind = parse_model_kind(m);
      if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown model '" + m + "'");
      cfg.models.push_back(*kind);
    }
  }
  if (o.search_mode) cfg.search_mode = *o.search_mode == "random" ? SearchMode::Random : SearchMode::Grid;
  if (o.budget) cfg.search_budget = *o.budget;
  if (o.search_config) cfg.search_config = o.search_config;
  if (o.folds) cfg.folds = *o.folds;
  if (o.stratified) cfg.stratified = *o.stratified;
  if (o.split) cfg.split_ratio = *o.split;
  if (o.table_out) cfg.metrics_csv = fs::absolute(*o.table_out);
  if (o.roc_dir) cfg.roc_dir = fs::absolute(*o.roc_dir);
  if (o.repeats) cfg.permutation_repeats = *o.repeats;
  if (o.oracle_draws) cfg.oracle_draws = *o.oracle_draws;
  if (o.llm_url) cfg.llm.endpoint.base_url = *o.llm_url;
  if (o.llm_model) cfg.llm.endpoint.model = *o.llm_model;
  if (o.stub_transcript) cfg.llm.stub_transcript = o.stub_transcript;
  if (o.llm_cases) cfg.llm.cases_per_class = *o.llm_cases;
  if (o.llm_url || o.stub_transcript) cfg.llm.enabled = true;
  return cfg;
}

// A synth run with --scale writes a temporary generator config next to the outputs.
void apply_scale(PipelineConfig& cfg, const Options& o) {
  if (!o.scale) return;
  GeneratorConfig gen = GeneratorConfig::desk(*o.scale);
  gen.seed = cfg.seed;
  fs::create_directories(cfg.out_dir);
  const fs::path p = cfg.out_dir / "generator_input.json";
  write_json_file(p, to_json(gen));
  cfg.generator_config = p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psytriage: psychiatric triage from prehospital rescue records"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out-dir", o.out_dir, "Artifact directory");
  app.add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
  app.add_flag("-q,--quiet", o.quiet, "Only log errors");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  synth->add_option("--generator-config", o.generator_config, "Generator config JSON");
  synth->add_option("--scale", o.scale, "Fraction of the desk corpus size");
  synth->add_option("--oracle-draws", o.oracle_draws, "Monte Carlo draws for the Bayes oracle (0 skips)");

  auto* ingest = app.add_subcommand("ingest", "Clean and merge raw tables into records");
  ingest->add_option("--table", o.tables, "Input CSV table (repeatable)")->required();
  ingest->add_option("--ingest-config", o.ingest_config, "Ingest config JSON");

  auto* wordcount = app.add_subcommand("wordcount", "Corpus word frequencies");
  wordcount->add_option("--min", o.wordcount_min, "Minimum count to report");

  auto* extract = app.add_subcommand("extract-features", "Keyword features per case");
  for (auto* sc : {synth, wordcount, extract}) sc->add_option("--lexicon", o.lexicon, "Keyword lexicon file");

  auto* select = app.add_subcommand("select-features", "Filter text features by relative deviation");
  select->add_option("--threshold", o.threshold, "Selection threshold on the ratio scale");
  select->add_option("--zero-reference", o.zero_reference, "Policy when the reference mean is zero")
      ->check(CLI::IsMember({"select", "reject"}));

  auto* tune = app.add_subcommand("tune", "Split and tune every model by cross-validation");
  tune->add_option("--models", o.models, "Models to tune")->delimiter(',');
  tune->add_option("--mode", o.search_mode, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  tune->add_option("--budget", o.budget, "Random search candidates per model");
  tune->add_option("--search-config", o.search_config, "Per-model search spaces JSON");
  tune->add_option("--folds", o.folds, "Cross-validation folds");
  tune->add_flag("--stratified,!--no-stratified", o.stratified, "Stratify folds by label (default on)");
  tune->add_option("--split", o.split, "Training fraction of the train/test split");

  auto* rfecv_cmd = app.add_subcommand("rfecv", "Recursive feature elimination for the tuned winner");
  rfecv_cmd->add_option("--repeats", o.repeats, "Permutation repeats per feature");
  rfecv_cmd->add_option("--folds", o.folds, "Cross-validation folds");

  auto* evaluate = app.add_subcommand("evaluate", "Hold-out metrics and ROC curves");
  evaluate->add_option("--split", o.split, "Training fraction; must match the split written by tune");
  evaluate->add_option("--out", o.table_out, "Metrics table CSV");
  evaluate->add_option("--roc-dir", o.roc_dir, "Directory for ROC point CSVs");

  auto* llm = app.add_subcommand("llm-compare", "Compare the best model with an LLM on sample cases");
  llm->add_option("--url", o.llm_url, "LLM endpoint base URL");
  llm->add_option("--model", o.llm_model, "LLM model name");
  llm->add_option("--stub-transcript", o.stub_transcript, "Serve canned replies from a JSONL transcript");
  llm->add_option("--cases-per-class", o.llm_cases, "Cases per class");

  auto* run_all = app.add_subcommand("run-all", "Run every stage and write manifest.json");
  run_all->add_option("--table", o.tables, "Ingest these tables instead of generating");
  run_all->add_option("--lexicon", o.lexicon, "Keyword lexicon file");
  run_all->add_option("--scale", o.scale, "Fraction of the desk corpus size");
  run_all->add_option("--models", o.models, "Models to tune")->delimiter(',');
  run_all->add_option("--mode", o.search_mode, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  run_all->add_option("--budget", o.budget, "Random search candidates per model");
  run_all->add_option("--llm-url", o.llm_url, "Enable the LLM comparison against this endpoint");
  run_all->add_option("--stub-transcript", o.stub_transcript, "Enable the LLM comparison with canned replies");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("psytriage");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(o.quiet ? spdlog::level::err : o.verbose ? spdlog::level::debug : spdlog::level::info);
  const auto progress = [](std::string_view msg) { spdlog::info("{}", msg); };

  try {
    PipelineConfig cfg = build_config(o);
    if (synth->parsed() || run_all->parsed()) apply_scale(cfg, o);
    if (run_all->parsed()) {
      const auto result = run_pipeline(cfg, progress);
      for (const auto& s : result.stages) spdlog::debug("{}: {}", s.name, s.status);
      spdlog::info("manifest written to {}", (cfg.out_dir / "manifest.json").string());
      return 0;
    }
    for (const auto* sc : app.get_subcommands()) {
      const auto rec = run_stage(cfg, sc->get_name(), progress);
      for (const auto& p : rec.outputs) spdlog::debug("wrote {}", (cfg.out_dir / p).string());
    }
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
