#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "psytriage/pipeline.hpp"

using namespace psytriage;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("psytriage_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineConfig small_config(const fs::path& dir) {
  auto gen = GeneratorConfig::desk(0.04);
  gen.seed = 3;
  write_json_file(dir / "gen.json", to_json(gen));
  PipelineConfig cfg;
  cfg.seed = 3;
  cfg.out_dir = dir / "out";
  cfg.generator_config = dir / "gen.json";
  cfg.models = {ModelKind::LR, ModelKind::NB, ModelKind::KNN};
  cfg.oracle_draws = 2000;
  cfg.permutation_repeats = 2;
  cfg.folds = 3;
  return cfg;
}

}  // namespace

TEST_CASE("sha256 of known input") {
  const auto dir = scratch("sha");
  {
    std::ofstream out(dir / "abc.txt", std::ios::binary);
    out << "abc";
  }
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}

TEST_CASE("missing config paths fail with the stage name before any work") {
  const auto dir = scratch("missing");
  PipelineConfig cfg;
  cfg.out_dir = dir / "out";
  cfg.lexicon = dir / "nope.txt";
  try {
    run_pipeline(cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "wordcount");
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(e.what()).find("nope.txt") != std::string::npos);
  }
  CHECK(!fs::exists(cfg.out_dir));
  fs::remove_all(dir);
}

TEST_CASE("pipeline config JSON resolves relative paths") {
  const auto cfg = pipeline_config_from_json(
      json{{"seed", 7}, {"lexicon", "lex.txt"}, {"out_dir", "o"}, {"models", {"RF", "knn"}}, {"cv", {{"folds", 4}}}},
      "/base");
  CHECK(cfg.seed == 7);
  CHECK(*cfg.lexicon == fs::path("/base/lex.txt"));
  CHECK(cfg.out_dir == fs::path("/base/o"));
  CHECK(cfg.models == std::vector<ModelKind>{ModelKind::RF, ModelKind::KNN});
  CHECK(cfg.folds == 4);
  CHECK_THROWS_AS(pipeline_config_from_json(json{{"models", {"GBM"}}}), Error);
  const auto back = pipeline_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("end-to-end run is complete and reproducible") {
  const auto dir = scratch("e2e");
  const auto cfg = small_config(dir);
  const auto first = run_pipeline(cfg);
  CHECK(first.ok());
  const auto& stages = first.manifest.at("stages");
  REQUIRE(stages.size() == 8);
  CHECK(stages[0].at("name") == "synth");
  CHECK(stages[7].at("name") == "llm-compare");
  CHECK(stages[7].at("status") == "skipped");
  for (const char* f : {"records.jsonl", "truth.csv", "oracle.json", "wordcount.csv", "features.jsonl",
                        "selection.json", "split.json", "leaderboard.json", "rfecv.json", "metrics.csv",
                        "evaluation.json", "best_model.json", "manifest.json", "roc/roc_lr.csv"})
    CHECK_MESSAGE(fs::exists(cfg.out_dir / f), f);
  CHECK(first.manifest.at("inputs").size() == 1);

  // a second run reproduces every artifact hash
  const auto second = run_pipeline(cfg);
  CHECK(second.manifest.at("stages") == first.manifest.at("stages"));

  // a single stage rerun from the stored artifacts gives the same table
  const auto table = sha256_file(cfg.out_dir / "metrics.csv");
  const auto rec = run_stage(cfg, "evaluate");
  CHECK(rec.status == "ok");
  CHECK(sha256_file(cfg.out_dir / "metrics.csv") == table);
  fs::remove_all(dir);
}

TEST_CASE("llm stage against a stub transcript") {
  const auto dir = scratch("llm");
  auto cfg = small_config(dir);
  {
    std::ofstream out(dir / "t.jsonl");
    out << R"({"response": "True"})" << "\n" << R"({"response": "false"})" << "\n";
  }
  cfg.llm.enabled = true;
  cfg.llm.stub_transcript = dir / "t.jsonl";
  cfg.llm.cases_per_class = 2;
  const auto r = run_pipeline(cfg);
  CHECK(r.manifest.at("stages")[7].at("status") == "ok");
  const auto j = read_json_file(cfg.out_dir / "llm_compare.json");
  CHECK(j.at("rows").size() == 4);
  CHECK(j.at("rows")[0].at("prompt").get<std::string>().find("'GCS': ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("single stages need their inputs") {
  const auto dir = scratch("stage");
  auto cfg = small_config(dir);
  try {
    run_stage(cfg, "tune");
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "tune");
  }
  CHECK_THROWS_AS(run_stage(cfg, "bogus"), Error);
  fs::remove_all(dir);
}
