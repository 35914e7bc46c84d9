// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "psytriage/pipeline.hpp"

using namespace psytriage;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances
constexpr double kExactTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kRelDevBudget = 1.0;        // seconds
constexpr double kLearnerBudget = 120.0;  // seconds
constexpr double kE2eBudget = 600.0;      // seconds
constexpr double kAccuracyMargin = 0.05;

// Bayes accuracy of the default desk generator, from 200000 Monte-Carlo draws
// (standard error 0.0003). Recomputed runs must agree within kOracleTol.
constexpr double kPinnedOracle = 0.8524;
constexpr double kOracleTol = 0.002;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome relative_deviation_suite() {
  Check c;
  const auto t0 = Clock::now();
  const double cases[20][3] = {
      {4, 1, 300},   {1, 1, 0},     {0, 1, 100},      {2, 1, 100},     {1, 2, 50},
      {3, 4, 25},    {5, 4, 25},    {-1, 1, 200},     {1, -1, 200},    {-3, -1, 200},
      {0.5, 0.25, 100}, {0.1, 0.4, 75}, {10, 2.5, 300}, {7, 7, 0},     {-2, -2, 0},
      {0, -5, 100},  {1e6, 1, 99999900}, {0.75, 0.25, 200}, {12, 3, 300}, {1.5, 1, 50},
  };
  for (const auto& k : cases) {
    const double got = relative_deviation(k[0], k[1]);
    c.expect(std::abs(got - k[2]) <= kExactTol * std::max(1.0, std::abs(k[2])),
             "relative_deviation(" + fmt(k[0]) + ", " + fmt(k[1]) + ") = " + fmt(got));
  }
  bool threw = false;
  try {
    relative_deviation(2, 0);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::ZeroReference;
  }
  c.expect(threw, "zero reference did not raise ZeroReference");
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-1e3, 1e3);
    double y = rng.uniform(-1e3, 1e3);
    if (std::abs(y) < 1e-6) y = 1;
    const double s = std::exp(rng.uniform(-10, 10));
    const double a = relative_deviation(x, y), b = relative_deviation(s * x, s * y);
    c.expect(std::abs(a - b) <= 1e-9 * std::max(1.0, a), "scale invariance broken at triple " + std::to_string(i));
  }
  const double t = seconds_since(t0);
  c.expect(t < kRelDevBudget, "runtime " + fmt(t, 3) + " s");
  c.note("20 hand cases, zero reference, 1000 scaled triples in " + fmt(t, 3) + " s");
  return c.result();
}

Outcome metric_suite() {
  Check c;
  const auto m = metrics(ConfusionMatrix{2, 1, 3, 0});
  c.expect(std::abs(*m.accuracy - 5.0 / 6.0) <= kExactTol, "accuracy " + fmt(*m.accuracy, 12));
  c.expect(std::abs(*m.f1 - 0.8) <= kExactTol, "F1 " + fmt(*m.f1, 12));
  c.expect(std::abs(*m.precision - 2.0 / 3.0) <= kExactTol, "precision");
  c.expect(*m.sensitivity == 1.0 && *m.specificity == 0.75, "sensitivity/specificity");
  Rng rng(2);
  int compared = 0;
  for (int i = 0; i < 10000; ++i) {
    const ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    const auto s = metrics(cm);
    if (!s.precision || !s.sensitivity || *s.precision + *s.sensitivity == 0) {
      c.expect(!s.f1, "F1 defined where precision or sensitivity is not");
      continue;
    }
    const double h = 2 * *s.precision * *s.sensitivity / (*s.precision + *s.sensitivity);
    c.expect(std::abs(*s.f1 - h) <= kExactTol, "F1 is not the harmonic mean");
    ++compared;
  }
  c.note("hand case exact; harmonic-mean identity on " + std::to_string(compared) + " random matrices");
  return c.result();
}

Outcome roc_suite() {
  Check c;
  Rng rng(3);
  int done = 0;
  double worst = 0;
  while (done < 500) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const auto levels = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5);
      s[i] = static_cast<double>(rng.below(levels));
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const double err = std::abs(roc_auc(y, s).auc - wins / pairs);
    worst = std::max(worst, err);
    c.expect(err <= kExactTol, "AUC differs from Mann-Whitney on instance " + std::to_string(done));
    ++done;
  }
  c.note("500 instances, max |error| " + fmt(worst, 17));
  return c.result();
}

Outcome negation_suite() {
  Check c;
  const auto& lex = default_lexicon();
  const int window = lex.lex.negation_window;
  const std::vector<std::string> fillers{"quickly", "really", "very", "somewhat", "clearly", "slowly"};
  std::size_t cells = 0;
  for (const auto& cat : lex.categories) {
    for (const auto& kw : cat.keywords) {
      // plain mention
      c.expect(match_category(tokenize("Crew notes " + kw + " today."), cat, lex.lex).has_value(),
               "keyword '" + kw + "' not matched");
      for (const auto& neg : lex.lex.negation_words) {
        for (int distance = 1; distance <= window + 3; ++distance) {
          for (bool boundary : {false, true}) {
            std::string text = "crew " + neg;
            for (int g = 0; g < distance - 1; ++g) text += " " + fillers[static_cast<std::size_t>(g)];
            text += boundary ? ". " : " ";
            text += kw + " today";
            const bool suppressed = !boundary && distance <= window;
            const bool found = match_category(tokenize(text), cat, lex.lex).has_value();
            c.expect(found == !suppressed, "'" + text + "' gave " + (found ? "match" : "no match"));
            ++cells;
          }
        }
      }
    }
  }
  c.note(std::to_string(cells) + " grid cells (keyword x negation word x distance x boundary)");
  return c.result();
}

Dataset blobs(std::size_t n, std::size_t d, double sep, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  for (std::size_t j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<double> row(d);
    for (auto& v : row) v = rng.normal();
    row[0] += y ? sep / 2 : -sep / 2;
    data.rows.push_back(row);
    data.labels.push_back(y);
  }
  return data;
}

Outcome learner_suite() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(4);

  // MLP gradients
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    mlp::Params p;
    p.inputs = 5;
    p.hidden = 7;
    p.w1.resize(35);
    p.b1.resize(7);
    p.w2.resize(7);
    for (auto& v : p.w1) v = rng.normal(0, 0.7);
    for (auto& v : p.b1) v = rng.normal(0, 0.3);
    for (auto& v : p.w2) v = rng.normal(0, 0.7);
    p.b2 = rng.normal();
    std::vector<std::vector<double>> x(16, std::vector<double>(5));
    std::vector<int> y(16);
    for (std::size_t i = 0; i < 16; ++i) {
      for (auto& v : x[i]) v = rng.normal();
      y[i] = rng.bernoulli(0.5);
    }
    mlp::Params g;
    mlp::loss_and_gradient(p, x, y, 1e-3, &g);
    const auto an = g.flatten();
    const auto flat = p.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      auto a = flat, b = flat;
      a[k] += 1e-6;
      b[k] -= 1e-6;
      mlp::Params pa = p, pb = p;
      pa.assign(a);
      pb.assign(b);
      const double num = (mlp::loss_and_gradient(pa, x, y, 1e-3, nullptr) -
                          mlp::loss_and_gradient(pb, x, y, 1e-3, nullptr)) / 2e-6;
      const double rel = std::abs(num - an[k]) / std::max(1.0, std::abs(num));
      worst = std::max(worst, rel);
    }
  }
  c.expect(worst <= kGradRelTol, "MLP gradient relative error " + fmt(worst, 8));

  // XGB training loss per round
  bool monotone = true;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto model = train(ModelSpec{ModelKind::XGB, {{"n_rounds", 60}}, s, 0.5}, blobs(400, 6, 1.0, s));
    const auto tr = model.training_trace();
    for (std::size_t r = 1; r < tr.size(); ++r) monotone = monotone && tr[r] <= tr[r - 1] + kExactTol;
  }
  c.expect(monotone, "XGB training loss increased");

  // KNN against an exhaustive scan
  const auto pts = blobs(200, 4, 1.0, 9);
  const auto knn = train(ModelSpec{ModelKind::KNN, {{"k", 7}}, 0, 0.5}, pts);
  const auto& st = knn.standardizer();
  bool knn_ok = true;
  for (int q = 0; q < 200; ++q) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal();
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double diff = (pts.rows[i][j] - x[j]) / st.scale[j];
        s += diff * diff;
      }
      d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    double pos = 0;
    for (int i = 0; i < 7; ++i) pos += pts.labels[d[static_cast<std::size_t>(i)].second];
    knn_ok = knn_ok && std::abs(knn.score(x) - pos / 7) <= kExactTol;
  }
  c.expect(knn_ok, "KNN disagrees with the exhaustive scan");

  // identical seeds give identical tables
  auto gen = GeneratorConfig::desk(0.1);
  gen.seed = 42;
  const auto cases = extract_all(generate(gen), default_lexicon());
  std::vector<std::string> names(FeatureVector::names().begin(), FeatureVector::names().end());
  const auto data = to_dataset(cases, names);
  std::vector<ModelSpec> specs;
  for (auto k : kAllModelKinds) specs.push_back(ModelSpec{k, {}, 42, 0.5});
  auto table = [&] {
    const auto split = split_train_test(data, 0.8, 42);
    return format_metrics_table(evaluate_all(specs, split.train, split.test));
  };
  const auto a = table();
  const auto b = table();
  c.expect(a == b, "repeated runs produced different tables");

  const double t = seconds_since(t0);
  c.expect(t < kLearnerBudget, "runtime " + fmt(t, 1) + " s");
  c.note("MLP grad rel err " + fmt(worst, 8) + ", XGB monotone, KNN exact on 200 queries, tables identical, " +
         fmt(t, 1) + " s");
  return c.result();
}

struct E2e {
  bool ran = false;
  std::string error;
  fs::path out;
  double seconds = 0;
};

E2e run_e2e() {
  E2e e;
  e.out = fs::temp_directory_path() / "psytriage_acceptance";
  fs::remove_all(e.out);
  PipelineConfig cfg;
  cfg.seed = 42;
  cfg.out_dir = e.out;
  const auto t0 = Clock::now();
  try {
    run_pipeline(cfg);
    e.ran = true;
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  e.seconds = seconds_since(t0);
  return e;
}

Outcome e2e_suite(const E2e& e) {
  Check c;
  c.expect(e.ran, "pipeline failed: " + e.error);
  if (!e.ran) return c.result();
  const auto oracle = read_json_file(e.out / "oracle.json").at("accuracy").get<double>();
  c.expect(std::abs(oracle - kPinnedOracle) <= kOracleTol, "oracle " + fmt(oracle) + " vs pinned " + fmt(kPinnedOracle));

  const auto leaderboard = read_json_file(e.out / "leaderboard.json");
  const std::string best = leaderboard.at("best_model").get<std::string>();
  double acc = -1;
  const auto evaluation = read_json_file(e.out / "evaluation.json");
  for (const auto& m : evaluation.at("models"))
    if (m.at("model") == best && m.contains("accuracy") && !m.at("accuracy").is_null()) acc = m.at("accuracy");
  c.expect(acc >= kPinnedOracle - kAccuracyMargin,
           best + " test accuracy " + fmt(acc) + " below " + fmt(kPinnedOracle - kAccuracyMargin));

  const auto rf = read_json_file(e.out / "rfecv.json");
  const auto order = rf.at("elimination_order").get<std::vector<std::string>>();
  const auto kept = rf.at("best_features").get<std::vector<std::string>>();
  c.expect(!order.empty() && order.front() == kNoiseProbe,
           "first eliminated: " + (order.empty() ? std::string("none") : order.front()));
  c.expect(std::find(kept.begin(), kept.end(), "preillness") == kept.end(), "preillness kept by RFECV");

  std::size_t records = read_jsonl_file(e.out / "records.jsonl").size();
  c.expect(records >= 1500 && records <= 2500, std::to_string(records) + " records");
  c.expect(e.seconds < kE2eBudget, "runtime " + fmt(e.seconds, 1) + " s");
  c.note(std::to_string(records) + " records; oracle " + fmt(oracle) + "; best tuned " + best + " test accuracy " +
         fmt(acc) + "; RFECV dropped " + order.front() + " first, kept " + std::to_string(kept.size()) +
         " features without preillness; " + fmt(e.seconds, 1) + " s");
  return c.result();
}

Outcome table_format_suite(const E2e& e) {
  Check c;
  c.expect(e.ran, "pipeline failed");
  if (!e.ran) return c.result();
  const std::regex row(R"(^(SVM|RF|XGB|K-NN|NB|LR|MLPC)(,(\d{1,3}\.\d{2}|NA)){5}$)");
  // a reference row has the same layout
  c.expect(std::regex_match(std::string("RF,89.27,89.44,89.07,90.59,90.01"), row), "reference row rejected");
  std::istringstream in(read_text_file(e.out / "metrics.csv"));
  std::string line;
  std::getline(in, line);
  c.expect(line == "model,accuracy,sensitivity,specificity,precision,f1", "header: " + line);
  int rows = 0;
  while (std::getline(in, line)) {
    c.expect(std::regex_match(line, row), "bad row: " + line);
    ++rows;
  }
  c.expect(rows == 7, std::to_string(rows) + " rows");
  c.note("header and 7 rows match the model x five-metric, two-decimal layout");
  return c.result();
}

Outcome prompt_suite() {
  Check c;
  const std::string instruction(kDefaultInstruction);
  const PromptValues sample{{"systolic_bp", 170.0},        {"respiratory_rate", 13.0},
                            {"circulation_normal", 1.0},   {"gcs", 15.0},
                            {"pulse_rhythm_regular", false}, {"preillness", false},
                            {"mental_abnormality", false}, {"psychiatric_symptoms", false},
                            {"alcoholism", false},         {"intoxication", false}};
  const std::string golden =
      "'Systolic Blood Pressure': 170,\n'Respiratory Rate': 13,\n'Blood Circulation Normality': 1,\n'GCS': 15,\n"
      "'Pulse Rhythm': False,\n'Any Preillness': False,\n'Mental Sickness Possibility': False,\n"
      "'Psychiatric Syndrom Presence': False,\n'Alcoholic Possibility': False,\n'Intoxication Possibility': False\n"
      "\nBased on the above data collected from patient, please reply with true or false if the patient can be "
      "diagnosed as psychiatric patient";
  c.expect(build_prompt(sample, full_prompt_template()) == golden, "sample prompt differs");

  struct Col {
    std::string id;
    double bp, rr;
    std::string circ;
    int gcs;
    bool mental, psy, alc, intox, ml, llm;
  };
  const std::vector<Col> table{
      {"Test1", 130, 16, "normal", 12, false, false, true, true, true, false},
      {"Test2", 100, 14, "normal", 15, false, false, false, false, false, false},
      {"Test3", 142, 15, "0", 15, false, true, false, false, true, true},
      {"Test4", 158, 12, "3", 12, false, false, false, false, false, false},
      {"Test5", 130, 16, "3", 15, true, true, false, false, true, true},
      {"Test6", 180, 16, "0", 14, false, false, false, false, false, false},
  };
  const auto tokens = RecordSchema::default_circulation_tokens();
  std::vector<std::string> ids;
  std::vector<PromptValues> values;
  std::vector<int> ml;
  std::vector<Verdict> llm;
  for (const auto& t : table) {
    TextFeatures tf;
    if (t.mental) tf[Category::MentalAbnormality] = "panic";
    if (t.psy) tf[Category::PsychiatricSymptoms] = "crying";
    if (t.alc) tf[Category::Alcoholism] = "vodka";
    if (t.intox) tf[Category::Intoxication] = "drugs";
    ids.push_back(t.id);
    values.push_back(prompt_values(to_feature_vector(Vitals(t.bp, t.rr, t.gcs, tokens.at(t.circ), false), tf)));
    const auto p = build_prompt(values.back(), reduced_prompt_template());
    c.expect(std::count(p.begin(), p.end(), '\n') == 10 && p.find("Any Preillness") == std::string::npos,
             t.id + " rendered wrongly");
    ml.push_back(t.ml);
    llm.push_back(t.llm ? Verdict::True : Verdict::False);
  }
  const auto report = compare(ids, values, ml, llm);
  c.expect(report.mismatches == 1 && report.mismatched_cases == std::vector<std::string>{"Test1"},
           std::to_string(report.mismatches) + " mismatches");

  // stub-server contract: request shape, retry on 5xx, verdict parsing
  StubServer stub({{"The patient is True", 200, 0}, {"busy", 503, 0}, {"false", 200, 0}});
  EndpointConfig ep;
  ep.base_url = stub.url();
  ep.backoff_ms = 1;
  ep.timeout_ms = 5000;
  const auto first = query(golden, ep);
  const auto second = query("x", ep);
  const auto reqs = stub.requests();
  c.expect(first.verdict == Verdict::True && second.verdict == Verdict::False, "stub verdicts");
  c.expect(reqs.size() == 3 && reqs[0].at("prompt") == golden && reqs[0].at("stream") == false &&
               reqs[0].at("model") == ep.model,
           "stub request contract");
  c.note("sample prompt byte-exact; 6 table cases render; 1 mismatch at Test1; stub contract holds");
  return c.result();
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  report("relative-deviation", relative_deviation_suite);
  report("metrics", metric_suite);
  report("roc-oracle", roc_suite);
  report("negation-grid", negation_suite);
  report("learner-properties", learner_suite);
  const E2e e2e = run_e2e();
  report("end-to-end", [&] { return e2e_suite(e2e); });
  report("table-format", [&] { return table_format_suite(e2e); });
  report("prompt-golden", prompt_suite);
  return failures;
}
