#include "psytriage/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psytriage/parallel.hpp"
#include "text_util.hpp"

namespace psytriage {

namespace fs = std::filesystem;

std::vector<WordCount> corpus_word_count(const std::vector<RescueRecord>& records, const Lexicon& lexicon,
                                         std::size_t min_count) {
  std::vector<std::vector<Token>> corpus(records.size());
  parallel_for(records.size(), [&](std::size_t i) { corpus[i] = tokenize_notes(records[i].notes); });
  return word_count(corpus, lexicon.lex, min_count);
}

std::string format_word_count_csv(const std::vector<WordCount>& counts) {
  std::ostringstream out;
  out << "word,count\n";
  for (const auto& c : counts) out << c.word << ',' << c.count << '\n';
  return out.str();
}

std::vector<CaseFeatures> extract_all(const std::vector<RescueRecord>& records, const Lexicon& lexicon) {
  std::vector<std::optional<CaseFeatures>> slots(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    if (!r.vitals.complete()) return;
    CaseFeatures c;
    c.case_id = r.case_id;
    c.label = r.label;
    c.text = extract_features(r, lexicon);
    c.features = to_feature_vector(r.vitals, c.text);
    slots[i] = std::move(c);
  });
  std::vector<CaseFeatures> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

std::vector<std::string> model_feature_names(const SelectionReport& selection) {
  std::vector<std::string> out;
  const auto& names = FeatureVector::names();
  for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
    const std::string n(names[i]);
    if (i < FeatureVector::kFirstText ||
        std::find(selection.selected.begin(), selection.selected.end(), n) != selection.selected.end())
      out.push_back(n);
  }
  return out;
}

TuningOutcome tune_models(const Dataset& train_set, const TuningOptions& options) {
  if (options.models.empty()) throw Error(ErrorCode::InvalidConfig, "no models to tune");
  TuningOutcome out;
  out.feature_names = train_set.feature_names;
  for (ModelKind kind : options.models) {
    ModelSpec base;
    base.kind = kind;
    base.seed = options.seed;
    SearchSpec s = default_search_space(kind);
    if (auto it = options.spaces.find(kind); it != options.spaces.end()) s.space = it->second.space;
    s.mode = options.mode;
    s.budget = options.budget;
    s.seed = Rng::mix(options.seed ^ static_cast<std::uint64_t>(kind));
    TunedModel t;
    t.search = search(base, s, options.cv, train_set);
    t.spec = t.search.best;
    out.models.push_back(std::move(t));
  }
  for (std::size_t i = 1; i < out.models.size(); ++i)
    if (out.models[i].search.leaderboard.front().cv.mean > out.models[out.best].search.leaderboard.front().cv.mean)
      out.best = i;
  return out;
}

json to_json(const TuningOutcome& t) {
  json models = json::array();
  for (const auto& m : t.models) {
    json j = to_json(m.search);
    j["model"] = model_name(m.spec.kind);
    j["mean_cv_accuracy"] = m.search.leaderboard.front().cv.mean;
    models.push_back(std::move(j));
  }
  return json{{"feature_names", t.feature_names},
              {"best_model", model_name(t.models.at(t.best).spec.kind)},
              {"models", models}};
}

TuningOutcome tuning_outcome_from_json(const json& j) {
  TuningOutcome t;
  t.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const std::string best = j.at("best_model").get<std::string>();
  for (const auto& m : j.at("models")) {
    TunedModel tm;
    tm.spec = model_spec_from_json(m.at("best"));
    tm.search.best = tm.spec;
    for (const auto& row : m.at("leaderboard")) {
      LeaderboardRow r;
      r.order = row.at("order").get<std::size_t>();
      r.params = row.at("params").get<Hyperparameters>();
      r.cv.mean = row.at("mean_accuracy").get<double>();
      r.cv.fold_scores = row.at("fold_accuracy").get<std::vector<double>>();
      tm.search.leaderboard.push_back(std::move(r));
    }
    if (m.at("model").get<std::string>() == best) t.best = t.models.size();
    t.models.push_back(std::move(tm));
  }
  if (t.models.empty()) throw Error(ErrorCode::Parse, "tuning file lists no models");
  return t;
}

Dataset with_noise_probe(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  const auto probe = noise_probe(data.size(), seed);
  out.feature_names.emplace_back(kNoiseProbe);
  for (std::size_t i = 0; i < out.size(); ++i) out.rows[i].push_back(probe[i]);
  return out;
}

std::vector<std::size_t> pick_llm_cases(const std::vector<int>& labels, std::size_t per_class) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& bucket = labels[i] == 1 ? pos : neg;
    if (bucket.size() < per_class) bucket.push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < per_class; ++k) {
    if (k < pos.size()) out.push_back(pos[k]);
    if (k < neg.size()) out.push_back(neg[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string zero_policy_name(ZeroReferencePolicy p) { return p == ZeroReferencePolicy::Select ? "select" : "reject"; }

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); }

std::optional<fs::path> read_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  fs::path p = j.at(key).get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json models = json::array();
  for (auto m : c.models) models.push_back(model_name(m));
  json tables = json::array();
  for (const auto& t : c.input_tables) tables.push_back(t.generic_string());
  return json{{"seed", c.seed},
              {"out_dir", c.out_dir.generic_string()},
              {"lexicon", optional_path(c.lexicon)},
              {"generator_config", optional_path(c.generator_config)},
              {"input_tables", tables},
              {"ingest_config", optional_path(c.ingest_config)},
              {"search_config", optional_path(c.search_config)},
              {"wordcount_min", c.wordcount_min},
              {"select_threshold", c.select_threshold},
              {"zero_reference", zero_policy_name(c.zero_reference)},
              {"models", models},
              {"search", {{"mode", c.search_mode == SearchMode::Grid ? "grid" : "random"}, {"budget", c.search_budget}}},
              {"cv", {{"folds", c.folds}, {"stratified", c.stratified}}},
              {"split_ratio", c.split_ratio},
              {"metrics_csv", optional_path(c.metrics_csv)},
              {"roc_dir", optional_path(c.roc_dir)},
              {"permutation_repeats", c.permutation_repeats},
              {"oracle_draws", c.oracle_draws},
              {"llm",
               {{"enabled", c.llm.enabled},
                {"endpoint", to_json(c.llm.endpoint)},
                {"stub_transcript", optional_path(c.llm.stub_transcript)},
                {"cases_per_class", c.llm.cases_per_class}}},
              {"workers", c.workers}};
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("out_dir")) {
      c.out_dir = j.at("out_dir").get<std::string>();
      if (c.out_dir.is_relative() && !base.empty()) c.out_dir = base / c.out_dir;
    }
    c.lexicon = read_path(j, "lexicon", base);
    c.generator_config = read_path(j, "generator_config", base);
    c.ingest_config = read_path(j, "ingest_config", base);
    c.search_config = read_path(j, "search_config", base);
    if (j.contains("input_tables")) {
      for (const auto& t : j.at("input_tables")) {
        fs::path p = t.get<std::string>();
        if (p.is_relative() && !base.empty()) p = base / p;
        c.input_tables.push_back(p);
      }
    }
    c.wordcount_min = j.value("wordcount_min", c.wordcount_min);
    c.select_threshold = j.value("select_threshold", c.select_threshold);
    const std::string zr = j.value("zero_reference", std::string("select"));
    if (zr == "select") c.zero_reference = ZeroReferencePolicy::Select;
    else if (zr == "reject") c.zero_reference = ZeroReferencePolicy::Reject;
    else throw Error(ErrorCode::InvalidConfig, "zero_reference must be 'select' or 'reject'");
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) {
        const auto kind = parse_model_kind(m.get<std::string>());
        if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown model '" + m.get<std::string>() + "'");
        c.models.push_back(*kind);
      }
    }
    if (j.contains("search")) {
      const auto& s = j.at("search");
      const std::string mode = s.value("mode", std::string("grid"));
      if (mode == "grid") c.search_mode = SearchMode::Grid;
      else if (mode == "random") c.search_mode = SearchMode::Random;
      else throw Error(ErrorCode::InvalidConfig, "search.mode must be 'grid' or 'random'");
      c.search_budget = s.value("budget", c.search_budget);
    }
    if (j.contains("cv")) {
      c.folds = j.at("cv").value("folds", c.folds);
      c.stratified = j.at("cv").value("stratified", c.stratified);
    }
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    c.metrics_csv = read_path(j, "metrics_csv", base);
    c.roc_dir = read_path(j, "roc_dir", base);
    c.permutation_repeats = j.value("permutation_repeats", c.permutation_repeats);
    c.oracle_draws = j.value("oracle_draws", c.oracle_draws);
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      c.llm.enabled = l.value("enabled", false);
      if (l.contains("endpoint")) c.llm.endpoint = endpoint_config_from_json(l.at("endpoint"));
      c.llm.stub_transcript = read_path(l, "stub_transcript", base);
      c.llm.cases_per_class = l.value("cases_per_class", c.llm.cases_per_class);
    }
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("pipeline config: ") + e.what());
  }
  return c;
}

bool PipelineResult::ok() const {
  return std::none_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.status == "failed"; });
}

void check_pipeline_paths(const PipelineConfig& cfg) {
  auto need = [](const std::string& stage, const char* what, const fs::path& p) {
    if (!fs::exists(p))
      throw StageError(stage, Error(ErrorCode::InvalidConfig, std::string(what) + " '" + p.generic_string() +
                                                                  "' does not exist"));
  };
  if (cfg.input_tables.empty()) {
    if (cfg.generator_config) need("synth", "generator config", *cfg.generator_config);
  } else {
    for (const auto& t : cfg.input_tables) need("ingest", "input table", t);
    if (cfg.ingest_config) need("ingest", "ingest config", *cfg.ingest_config);
  }
  if (cfg.lexicon) need("wordcount", "lexicon", *cfg.lexicon);
  if (cfg.search_config) need("tune", "search config", *cfg.search_config);
  if (cfg.llm.enabled && cfg.llm.stub_transcript) need("llm-compare", "stub transcript", *cfg.llm.stub_transcript);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "SHA-256 initialisation failed");
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

const std::vector<std::string>& pipeline_stage_names() {
  static const std::vector<std::string> names{"synth",  "ingest", "wordcount", "extract-features",
                                              "select-features", "tune", "rfecv", "evaluate", "llm-compare"};
  return names;
}

namespace {

// Stage inputs, loaded from out_dir on first use when an earlier stage did
// not run in this process.
class StageContext {
 public:
  StageContext(const PipelineConfig& cfg, const std::function<void(std::string_view)>& progress)
      : cfg_(cfg), progress_(progress) {}

  const PipelineConfig& cfg() const { return cfg_; }
  fs::path path(const fs::path& rel) const { return cfg_.out_dir / rel; }
  void say(const std::string& msg) const {
    if (progress_) progress_(msg);
  }

  const Lexicon& lexicon() {
    if (!lexicon_) lexicon_ = cfg_.lexicon ? load_lexicon(*cfg_.lexicon) : default_lexicon();
    return *lexicon_;
  }

  std::vector<RescueRecord> records;
  bool records_loaded = false;
  const std::vector<RescueRecord>& ensure_records() {
    if (!records_loaded) {
      records = read_records(need("records.jsonl"));
      records_loaded = true;
    }
    return records;
  }

  std::vector<CaseFeatures> cases;  // labelled only
  bool cases_loaded = false;
  void set_cases(std::vector<CaseFeatures> all) {
    cases.clear();
    for (auto& c : all)
      if (c.label != Label::Unknown) cases.push_back(std::move(c));
    if (cases.empty()) throw Error(ErrorCode::InvalidValue, "no labelled cases with complete vitals");
    cases_loaded = true;
  }
  const std::vector<CaseFeatures>& ensure_cases() {
    if (!cases_loaded) set_cases(read_case_features(need("features.jsonl")));
    return cases;
  }

  std::optional<SelectionReport> selection;
  const SelectionReport& ensure_selection() {
    if (!selection) selection = selection_report_from_json(read_json_file(need("selection.json")));
    return *selection;
  }

  std::vector<std::size_t> train_index, test_index;  // into cases
  std::optional<Dataset> train_set, test_set;
  std::optional<double> split_ratio;
  void set_split(std::vector<std::size_t> train_idx, std::vector<std::size_t> test_idx) {
    const Dataset data = to_dataset(ensure_cases(), model_feature_names(ensure_selection()));
    train_index = std::move(train_idx);
    test_index = std::move(test_idx);
    train_set = data.select_rows(train_index);
    test_set = data.select_rows(test_index);
  }
  void ensure_split() {
    if (train_set) return;
    const json j = read_json_file(need("split.json"));
    std::map<std::string, std::size_t> by_id;
    const auto& cs = ensure_cases();
    for (std::size_t i = 0; i < cs.size(); ++i) by_id[cs[i].case_id] = i;
    auto lookup = [&](const json& ids) {
      std::vector<std::size_t> out;
      for (const auto& id : ids) {
        auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end())
          throw Error(ErrorCode::InvalidValue, "split.json names unknown case '" + id.get<std::string>() + "'");
        out.push_back(it->second);
      }
      return out;
    };
    set_split(lookup(j.at("train")), lookup(j.at("test")));
    split_ratio = j.at("ratio").get<double>();
  }

  std::optional<TuningOutcome> tuning;
  const TuningOutcome& ensure_tuning() {
    if (!tuning) tuning = tuning_outcome_from_json(read_json_file(need("leaderboard.json")));
    return *tuning;
  }

  std::optional<std::vector<std::string>> final_features;
  const std::vector<std::string>& ensure_final_features() {
    if (!final_features)
      final_features = read_json_file(need("rfecv.json")).at("final_features").get<std::vector<std::string>>();
    return *final_features;
  }

  std::optional<TrainedModel> best_model;
  const TrainedModel& ensure_best_model() {
    if (!best_model) best_model = TrainedModel::from_json(read_json_file(need("best_model.json")));
    return *best_model;
  }

 private:
  fs::path need(const char* rel) const {
    fs::path p = path(rel);
    if (!fs::exists(p))
      throw Error(ErrorCode::Io, "missing " + p.generic_string() + " (run the earlier stages first)");
    return p;
  }

  const PipelineConfig& cfg_;
  const std::function<void(std::string_view)>& progress_;
  std::optional<Lexicon> lexicon_;
};

json predictions_json(const std::vector<CaseFeatures>& cases, const std::vector<std::size_t>& idx,
                      const std::vector<double>& scores, double threshold) {
  json rows = json::array();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    rows.push_back(json{{"case_id", cases[idx[k]].case_id},
                        {"label", to_string(cases[idx[k]].label)},
                        {"score", scores[k]},
                        {"prediction", scores[k] >= threshold}});
  }
  return rows;
}

using Emit = std::function<fs::path(const fs::path&)>;

void stage_synth(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  GeneratorConfig gen = GeneratorConfig::desk();
  gen.seed = cfg.seed;
  if (cfg.generator_config) gen = generator_config_from_json(read_json_file(*cfg.generator_config));
  const auto cases = generate_cases(gen, ctx.lexicon());
  ctx.records.clear();
  for (const auto& c : cases) ctx.records.push_back(c.record);
  ctx.records_loaded = true;
  write_records(out("records.jsonl"), ctx.records);
  write_text_file(out("truth.csv"), format_truth_csv(cases));
  write_json_file(out("generator_config.json"), to_json(gen));
  if (cfg.oracle_draws > 0) {
    const auto oracle = oracle_accuracy(gen, cfg.oracle_draws);
    write_json_file(out("oracle.json"), json{{"accuracy", oracle.accuracy},
                                             {"standard_error", oracle.standard_error},
                                             {"draws", oracle.draws}});
    ctx.say("oracle accuracy " + detail::format_number(oracle.accuracy));
  }
  ctx.say("generated " + std::to_string(ctx.records.size()) + " records");
}

void stage_ingest(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  if (cfg.input_tables.empty()) throw Error(ErrorCode::InvalidConfig, "no input tables given");
  IngestConfig ic;
  if (cfg.ingest_config) ic = ingest_config_from_json(read_json_file(*cfg.ingest_config));
  std::vector<Table> tables;
  for (const auto& t : cfg.input_tables) tables.push_back(read_csv_file(t, ic.delimiter));
  auto r = run_ingest(tables, ic);
  ctx.records = std::move(r.records);
  ctx.records_loaded = true;
  write_records(out("records.jsonl"), ctx.records);
  std::vector<json> rejected;
  for (const auto& row : r.rejected) {
    json errs = json::array();
    for (const auto& e : row.errors) errs.push_back(e.message());
    rejected.push_back(json{{"case_id", row.case_id}, {"errors", errs}});
  }
  write_jsonl_file(out("rejected.jsonl"), rejected);
  write_text_file(out("ingest_log.txt"), detail::join(r.log, "\n") + (r.log.empty() ? "" : "\n"));
  ctx.say("ingested " + std::to_string(ctx.records.size()) + " records, rejected " +
          std::to_string(r.rejected.size()));
}

void stage_wordcount(StageContext& ctx, const Emit& out) {
  write_text_file(out("wordcount.csv"), format_word_count_csv(corpus_word_count(
                                            ctx.ensure_records(), ctx.lexicon(), ctx.cfg().wordcount_min)));
}

void stage_extract(StageContext& ctx, const Emit& out) {
  auto all = extract_all(ctx.ensure_records(), ctx.lexicon());
  write_case_features(out("features.jsonl"), all);
  ctx.set_cases(std::move(all));
  ctx.say("extracted " + std::to_string(ctx.cases.size()) + " labelled cases");
}

void stage_select(StageContext& ctx, const Emit& out) {
  ctx.selection = filter_select(ctx.ensure_cases(), ctx.cfg().select_threshold, ctx.cfg().zero_reference);
  write_json_file(out("selection.json"), to_json(*ctx.selection));
  ctx.say("selected text features: " + detail::join(ctx.selection->selected, ", "));
}

CvSpec cv_spec(const PipelineConfig& cfg) { return CvSpec{cfg.folds, cfg.stratified, cfg.seed}; }

void stage_tune(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  const auto& cases = ctx.ensure_cases();
  const Dataset data = to_dataset(cases, model_feature_names(ctx.ensure_selection()));
  const auto split = split_train_test(data, cfg.split_ratio, cfg.seed, true);
  ctx.set_split(split.train_index, split.test_index);
  ctx.split_ratio = cfg.split_ratio;
  json sj{{"ratio", cfg.split_ratio}, {"seed", cfg.seed}, {"train", json::array()}, {"test", json::array()}};
  for (auto i : split.train_index) sj["train"].push_back(cases[i].case_id);
  for (auto i : split.test_index) sj["test"].push_back(cases[i].case_id);
  write_json_file(out("split.json"), sj);

  TuningOptions opt;
  opt.models = cfg.models;
  opt.mode = cfg.search_mode;
  opt.budget = cfg.search_budget;
  opt.cv = cv_spec(cfg);
  opt.seed = cfg.seed;
  if (cfg.search_config) {
    for (const auto& [name, spec] : read_json_file(*cfg.search_config).items()) {
      const auto kind = parse_model_kind(name);
      if (!kind) throw Error(ErrorCode::InvalidConfig, "search config names unknown model '" + name + "'");
      opt.spaces[*kind] = search_spec_from_json(spec);
    }
  }
  ctx.tuning = tune_models(*ctx.train_set, opt);
  write_json_file(out("leaderboard.json"), to_json(*ctx.tuning));
  ctx.say("best tuned model: " + std::string(model_name(ctx.tuning->models[ctx.tuning->best].spec.kind)));
}

void stage_rfecv(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  ctx.ensure_split();
  const ModelSpec& spec = ctx.ensure_tuning().models[ctx.tuning->best].spec;
  RfecvOptions opt;
  opt.seed = cfg.seed;
  opt.permutation_repeats = cfg.permutation_repeats;
  const auto r = rfecv(with_noise_probe(*ctx.train_set, cfg.seed), spec, cv_spec(cfg), opt);
  std::vector<std::string> kept;
  for (const auto& f : r.best_features)
    if (f != kNoiseProbe) kept.push_back(f);
  json j = to_json(r);
  j["model"] = model_name(spec.kind);
  j["noise_probe_retained"] = kept.size() != r.best_features.size();
  j["final_features"] = kept;
  write_json_file(out("rfecv.json"), j);
  ctx.final_features = std::move(kept);
  ctx.say("RFECV kept: " + detail::join(*ctx.final_features, ", "));
}

void stage_evaluate(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  ctx.ensure_split();
  if (ctx.split_ratio && std::abs(*ctx.split_ratio - cfg.split_ratio) > 1e-12)
    throw Error(ErrorCode::InvalidConfig, "split ratio " + detail::format_number(cfg.split_ratio) +
                                              " differs from the stored split (" +
                                              detail::format_number(*ctx.split_ratio) + "); rerun tune");
  const auto& features = ctx.ensure_final_features();
  const auto& tuning = ctx.ensure_tuning();
  const Dataset train_set = ctx.train_set->select_columns(features);
  const Dataset test = ctx.test_set->select_columns(features);
  std::vector<ModelSpec> specs;
  for (const auto& m : tuning.models) specs.push_back(m.spec);
  const auto rows = evaluate_all(specs, train_set, test);
  write_text_file(out(cfg.metrics_csv.value_or("metrics.csv")), format_metrics_table(rows));

  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json ev = json::array();
  for (const auto& r : rows) {
    json j{{"model", model_name(r.spec.kind)}, {"spec", to_json(r.spec)}};
    if (r.report) {
      const auto& s = r.report->scalars;
      j["confusion"] = to_json(r.report->confusion);
      j["accuracy"] = opt(s.accuracy);
      j["sensitivity"] = opt(s.sensitivity);
      j["specificity"] = opt(s.specificity);
      j["precision"] = opt(s.precision);
      j["f1"] = opt(s.f1);
      j["auc"] = opt(r.report->auc);
    } else {
      j["error"] = r.error;
    }
    ev.push_back(std::move(j));
  }
  write_json_file(out("evaluation.json"), json{{"features", features}, {"models", ev}});
  const fs::path roc = cfg.roc_dir.value_or("roc");
  fs::create_directories(ctx.path(roc));
  write_roc_files(ctx.path(roc), rows);
  for (const auto& r : rows) {
    if (!r.report || r.report->roc_points.empty()) continue;
    std::string name(model_name(r.spec.kind));
    std::replace(name.begin(), name.end(), '-', '_');
    out(roc / ("roc_" + detail::lower_ascii(name) + ".csv"));
  }

  // the tuned winner, refit on the reduced feature set
  ctx.best_model = train(tuning.models[tuning.best].spec, train_set);
  write_json_file(out("best_model.json"), ctx.best_model->to_json());
  write_json_file(out("test_predictions.json"),
                  predictions_json(ctx.cases, ctx.test_index, ctx.best_model->scores(test),
                                   ctx.best_model->spec().threshold));
}

void stage_llm(StageContext& ctx, const Emit& out) {
  const auto& cfg = ctx.cfg();
  ctx.ensure_split();
  const auto& features = ctx.ensure_final_features();
  const auto& model = ctx.ensure_best_model();
  EndpointConfig ep = cfg.llm.endpoint;
  ep.apply_environment();
  std::unique_ptr<StubServer> stub;
  if (cfg.llm.stub_transcript) {
    stub = std::make_unique<StubServer>(load_transcript(*cfg.llm.stub_transcript));
    ep.base_url = stub->url();
  }
  const Dataset test = ctx.test_set->select_columns(features);
  const auto picks = pick_llm_cases(test.labels, cfg.llm.cases_per_class);
  const PromptTemplate tmpl = restrict_template(full_prompt_template(), features);
  std::vector<std::string> ids, prompts;
  std::vector<PromptValues> values;
  std::vector<int> ml;
  std::vector<Label> reference;
  for (auto k : picks) {
    const auto& c = ctx.cases[ctx.test_index[k]];
    ids.push_back(c.case_id);
    values.push_back(prompt_values(c.features));
    prompts.push_back(build_prompt(values.back(), tmpl));
    ml.push_back(model.predict(test.rows[k]));
    reference.push_back(c.label);
  }
  const auto replies = query_all(prompts, ep);
  std::vector<Verdict> verdicts;
  for (const auto& r : replies) verdicts.push_back(r.verdict);
  const auto report = compare(ids, values, ml, verdicts, reference);
  json j = to_json(report);
  for (std::size_t i = 0; i < replies.size(); ++i) {
    j["rows"][i]["prompt"] = prompts[i];
    j["rows"][i]["raw_response"] = replies[i].raw_response;
  }
  j["model"] = ep.model;
  j["template"] = to_json(tmpl);
  write_json_file(out("llm_compare.json"), j);
  ctx.say("LLM agreement with the ML model: " + detail::format_number(report.agreement));
}

StageRecord execute(StageContext& ctx, const std::string& name) {
  using Fn = void (*)(StageContext&, const Emit&);
  static const std::map<std::string, Fn> table{
      {"synth", stage_synth},         {"ingest", stage_ingest},           {"wordcount", stage_wordcount},
      {"extract-features", stage_extract}, {"select-features", stage_select}, {"tune", stage_tune},
      {"rfecv", stage_rfecv},         {"evaluate", stage_evaluate},       {"llm-compare", stage_llm}};
  const auto it = table.find(name);
  if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown stage '" + name + "'");
  ctx.say("stage " + name);
  StageRecord rec{name, "ok", {}, {}};
  const Emit emit = [&](const fs::path& rel) {
    rec.outputs.push_back(rel);
    return ctx.path(rel);
  };
  try {
    it->second(ctx, emit);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const json::exception& e) {
    throw StageError(name, Error(ErrorCode::Parse, e.what()));
  } catch (const std::exception& e) {
    throw StageError(name, Error(ErrorCode::Io, e.what()));
  }
  return rec;
}

}  // namespace

StageRecord run_stage(const PipelineConfig& cfg, std::string_view name,
                      const std::function<void(std::string_view)>& progress) {
  check_pipeline_paths(cfg);
  if (cfg.workers) set_default_workers(cfg.workers);
  fs::create_directories(cfg.out_dir);
  StageContext ctx(cfg, progress);
  return execute(ctx, std::string(name));
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::function<void(std::string_view)>& progress) {
  check_pipeline_paths(cfg);
  if (cfg.workers) set_default_workers(cfg.workers);
  fs::create_directories(cfg.out_dir);

  std::vector<std::pair<std::string, fs::path>> inputs;
  if (cfg.lexicon) inputs.emplace_back("lexicon", *cfg.lexicon);
  if (cfg.input_tables.empty() && cfg.generator_config) inputs.emplace_back("generator_config", *cfg.generator_config);
  for (const auto& t : cfg.input_tables) inputs.emplace_back("input_table", t);
  if (!cfg.input_tables.empty() && cfg.ingest_config) inputs.emplace_back("ingest_config", *cfg.ingest_config);
  if (cfg.search_config) inputs.emplace_back("search_config", *cfg.search_config);
  if (cfg.llm.enabled && cfg.llm.stub_transcript) inputs.emplace_back("stub_transcript", *cfg.llm.stub_transcript);

  PipelineResult result;
  auto write_manifest = [&] {
    json stages = json::array();
    for (const auto& s : result.stages) {
      json outs = json::array();
      for (const auto& o : s.outputs)
        outs.push_back(json{{"path", o.generic_string()}, {"sha256", sha256_file(cfg.out_dir / o)}});
      json js{{"name", s.name}, {"status", s.status}, {"outputs", outs}};
      if (!s.message.empty()) js["message"] = s.message;
      stages.push_back(std::move(js));
    }
    json ins = json::array();
    for (const auto& [role, p] : inputs)
      ins.push_back(json{{"role", role}, {"path", p.generic_string()}, {"sha256", sha256_file(p)}});
    result.manifest = json{{"tool", "psytriage"},
                           {"version", PSYTRIAGE_VERSION},
                           {"model_format_version", kModelFormatVersion},
                           {"seed", cfg.seed},
                           {"config", to_json(cfg)},
                           {"inputs", ins},
                           {"stages", stages}};
    write_json_file(cfg.out_dir / "manifest.json", result.manifest);
  };

  std::vector<std::string> plan{cfg.input_tables.empty() ? "synth" : "ingest", "wordcount", "extract-features",
                                "select-features", "tune", "rfecv", "evaluate"};
  StageContext ctx(cfg, progress);
  for (const auto& name : plan) {
    try {
      result.stages.push_back(execute(ctx, name));
    } catch (const StageError& e) {
      result.stages.push_back({name, "failed", e.what(), {}});
      write_manifest();
      throw;
    }
  }
  if (!cfg.llm.enabled) {
    result.stages.push_back({"llm-compare", "skipped", "LLM comparison not enabled", {}});
  } else {
    try {
      result.stages.push_back(execute(ctx, "llm-compare"));
    } catch (const StageError& e) {
      result.stages.push_back({"llm-compare", "failed", e.what(), {}});
      write_manifest();
      throw;
    }
  }
  write_manifest();
  return result;
}

}  // namespace psytriage
