#include "psytriage/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "psytriage/parallel.hpp"
#include "text_util.hpp"

namespace psytriage {

namespace {

double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// P(a <= X < b) for a standard normal X, accurate in either tail.
double normal_mass(double a, double b) {
  if (a > 0) return upper_tail(a) - upper_tail(b);
  return upper_tail(-b) - upper_tail(-a);
}

}  // namespace

double DiscreteNormal::pmf(double v) const {
  if (v < min || v > max || v != std::round(v)) return 0.0;
  const double z = normal_mass((min - 0.5 - mean) / sd, (max + 0.5 - mean) / sd);
  return normal_mass((v - 0.5 - mean) / sd, (v + 0.5 - mean) / sd) / z;
}

double DiscreteNormal::draw(Rng& rng) const {
  for (;;) {
    const double v = std::round(rng.normal(mean, sd));
    if (v >= min && v <= max) return v;
  }
}

// ---------------------------------------------------------------------------
// Configuration

GeneratorConfig GeneratorConfig::desk(double scale) {
  GeneratorConfig c;
  c.n_psychiatric = static_cast<std::size_t>(std::llround(10220 * scale));
  c.n_nonpsychiatric = static_cast<std::size_t>(std::llround(8758 * scale));
  c.seed = 42;
  c.negation_probability = 0.15;
  c.noise_tokens = 14;

  auto& p = c.psychiatric;
  p.systolic_bp = {136, 22, 70, 230};
  p.respiratory_rate = {17, 3.5, 6, 40};
  p.gcs = {14.2, 1.6, 3, 15};
  p.circulation_normal = 0.88;
  p.pulse_rhythm_regular = 0.90;
  auto& n = c.non_psychiatric;
  n.systolic_bp = {128, 24, 70, 230};
  n.respiratory_rate = {15.5, 3.5, 6, 40};
  n.gcs = {13.6, 2.2, 3, 15};
  n.circulation_normal = 0.70;
  n.pulse_rhythm_regular = 0.72;

  auto set = [](ClassProfile& prof, Category cat, double v) { prof.keyword[static_cast<std::size_t>(cat)] = v; };
  set(p, Category::PsychiatricSymptoms, 0.70);
  set(n, Category::PsychiatricSymptoms, 0.08);
  set(p, Category::MentalAbnormality, 0.35);
  set(n, Category::MentalAbnormality, 0.04);
  set(p, Category::Alcoholism, 0.30);
  set(n, Category::Alcoholism, 0.04);
  set(p, Category::Intoxication, 0.25);
  set(n, Category::Intoxication, 0.03);
  set(p, Category::Preillness, 0.012);
  set(n, Category::Preillness, 0.001);
  return c;
}

void GeneratorConfig::validate() const {
  auto prob = [](double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, what + " must be a probability in [0, 1]");
  };
  auto dist = [](const DiscreteNormal& d, const std::string& what, double lo, double hi) {
    if (!(d.sd > 0) || !std::isfinite(d.mean)) throw Error(ErrorCode::InvalidConfig, what + " needs sd > 0");
    if (d.min > d.max) throw Error(ErrorCode::InvalidConfig, what + " has min > max");
    if (d.min < lo || d.max > hi)
      throw Error(ErrorCode::InvalidConfig, what + " truncation lies outside the valid range");
    if (d.min != std::round(d.min) || d.max != std::round(d.max))
      throw Error(ErrorCode::InvalidConfig, what + " bounds must be integers");
  };
  prob(negation_probability, "negation_probability");
  if (!(noise_tokens >= 0.0) || noise_tokens > 1000) throw Error(ErrorCode::InvalidConfig, "noise_tokens out of range");
  for (const auto* prof : {&psychiatric, &non_psychiatric}) {
    const std::string cls = prof == &psychiatric ? "psychiatric" : "non_psychiatric";
    dist(prof->systolic_bp, cls + ".systolic_bp", 0, 400);
    dist(prof->respiratory_rate, cls + ".respiratory_rate", 0, 120);
    dist(prof->gcs, cls + ".gcs", 3, 15);
    prob(prof->circulation_normal, cls + ".circulation_normal");
    prob(prof->pulse_rhythm_regular, cls + ".pulse_rhythm_regular");
    for (Category c : kAllCategories)
      prob(prof->keyword[static_cast<std::size_t>(c)], cls + ".keywords." + std::string(category_id(c)));
  }
}

namespace {

json dist_json(const DiscreteNormal& d) {
  return json{{"mean", d.mean}, {"sd", d.sd}, {"min", d.min}, {"max", d.max}};
}

void read_dist(const json& j, const char* key, DiscreteNormal& d) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  d.mean = v.value("mean", d.mean);
  d.sd = v.value("sd", d.sd);
  d.min = v.value("min", d.min);
  d.max = v.value("max", d.max);
}

json profile_json(const ClassProfile& p) {
  json kw = json::object();
  for (Category c : kAllCategories) kw[std::string(category_id(c))] = p.keyword[static_cast<std::size_t>(c)];
  return json{{"systolic_bp", dist_json(p.systolic_bp)},
              {"respiratory_rate", dist_json(p.respiratory_rate)},
              {"gcs", dist_json(p.gcs)},
              {"circulation_normal", p.circulation_normal},
              {"pulse_rhythm_regular", p.pulse_rhythm_regular},
              {"keywords", kw}};
}

void read_profile(const json& j, ClassProfile& p) {
  read_dist(j, "systolic_bp", p.systolic_bp);
  read_dist(j, "respiratory_rate", p.respiratory_rate);
  read_dist(j, "gcs", p.gcs);
  p.circulation_normal = j.value("circulation_normal", p.circulation_normal);
  p.pulse_rhythm_regular = j.value("pulse_rhythm_regular", p.pulse_rhythm_regular);
  if (j.contains("keywords")) {
    for (const auto& [k, v] : j.at("keywords").items()) {
      const auto cat = parse_category(k);
      if (!cat) throw Error(ErrorCode::InvalidConfig, "unknown category '" + k + "' in generator config");
      p.keyword[static_cast<std::size_t>(*cat)] = v.get<double>();
    }
  }
}

}  // namespace

json to_json(const GeneratorConfig& cfg) {
  return json{{"n_psychiatric", cfg.n_psychiatric},
              {"n_nonpsychiatric", cfg.n_nonpsychiatric},
              {"seed", cfg.seed},
              {"negation_probability", cfg.negation_probability},
              {"noise_tokens", cfg.noise_tokens},
              {"psychiatric", profile_json(cfg.psychiatric)},
              {"non_psychiatric", profile_json(cfg.non_psychiatric)}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c = GeneratorConfig::desk(j.value("scale", 0.1));
  c.n_psychiatric = j.value("n_psychiatric", c.n_psychiatric);
  c.n_nonpsychiatric = j.value("n_nonpsychiatric", c.n_nonpsychiatric);
  c.seed = j.value("seed", c.seed);
  c.negation_probability = j.value("negation_probability", c.negation_probability);
  c.noise_tokens = j.value("noise_tokens", c.noise_tokens);
  if (j.contains("psychiatric")) read_profile(j.at("psychiatric"), c.psychiatric);
  if (j.contains("non_psychiatric")) read_profile(j.at("non_psychiatric"), c.non_psychiatric);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Records

namespace {

constexpr std::array<std::string_view, 6> kPlainTemplates = {
    "Signs of {} noted on arrival.", "Relatives mention {}.",  "On scene {} reported.",
    "History suggests {}.",          "Crew observed {}.",      "Bystanders describe {}."};

// negation word within three tokens before the keyword
constexpr std::array<std::string_view, 4> kNegatedTemplates = {"No {}.", "Denies {}.", "Without {} today.",
                                                               "Relatives report no {}."};

constexpr std::array<std::string_view, 48> kFiller = {
    "ambulance", "called",   "arrival",  "transport", "hospital", "stable",   "monitor",  "ecg",
    "oxygen",    "blood",    "sugar",    "pain",      "chest",    "abdomen",  "fall",     "knee",
    "dizzy",     "nausea",   "vomiting", "headache",  "fever",    "breathing", "wound",   "bandage",
    "left",      "right",    "arm",      "leg",       "home",     "street",   "neighbour", "wife",
    "husband",   "son",      "daughter", "emergency", "doctor",   "clinic",   "evening",  "morning",
    "apartment", "stairs",   "seated",   "lying",     "alert",    "responsive", "pupils", "skin"};

std::string fill(std::string_view tmpl, const std::string& kw) {
  const auto pos = tmpl.find("{}");
  std::string out(tmpl.substr(0, pos));
  out += kw;
  out += tmpl.substr(pos + 2);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::array<std::vector<std::string>, kCategoryCount> keyword_pools(const Lexicon& lexicon) {
  std::map<std::string, int> owners;
  for (const auto& cat : lexicon.categories)
    for (const auto& kw : std::set<std::string>(cat.keywords.begin(), cat.keywords.end())) ++owners[kw];
  std::array<std::vector<std::string>, kCategoryCount> pools;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    for (const auto& kw : lexicon.categories[c].keywords) {
      const auto first = kw.substr(0, kw.find(' '));
      if (owners[kw] == 1 && !lexicon.lex.negation_words.contains(first)) pools[c].push_back(kw);
    }
  }
  return pools;
}

}  // namespace

std::vector<GeneratedCase> generate_cases(const GeneratorConfig& cfg, const Lexicon& lexicon) {
  cfg.validate();
  const auto pools = keyword_pools(lexicon);
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const bool used = cfg.psychiatric.keyword[c] > 0 || cfg.non_psychiatric.keyword[c] > 0;
    if (used && pools[c].empty())
      throw Error(ErrorCode::InvalidConfig, "lexicon has no single-category keyword for " +
                                                std::string(category_id(kAllCategories[c])));
  }

  const std::size_t n = cfg.n_psychiatric + cfg.n_nonpsychiatric;
  std::vector<Label> labels(n, Label::NonPsychiatric);
  std::fill_n(labels.begin(), cfg.n_psychiatric, Label::Psychiatric);
  Rng order(Rng::derive(cfg.seed, ~std::uint64_t{0}));
  order.shuffle(labels);

  const std::size_t width = std::to_string(std::max<std::size_t>(n, 1)).size();
  std::vector<GeneratedCase> out(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng = Rng::derive(cfg.seed, i);
    GeneratedCase& g = out[i];
    RescueRecord& r = g.record;
    r.label = labels[i];
    const ClassProfile& prof = r.label == Label::Psychiatric ? cfg.psychiatric : cfg.non_psychiatric;
    std::string id = std::to_string(i + 1);
    r.case_id = "S" + std::string(width - id.size(), '0') + id;
    r.vitals.systolic_bp = prof.systolic_bp.draw(rng);
    r.vitals.respiratory_rate = prof.respiratory_rate.draw(rng);
    r.vitals.gcs = static_cast<int>(prof.gcs.draw(rng));
    r.vitals.circulation_normal = rng.bernoulli(prof.circulation_normal);
    r.vitals.pulse_rhythm_regular = rng.bernoulli(prof.pulse_rhythm_regular);

    std::vector<std::string> sentences;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      g.injected[c] = rng.bernoulli(prof.keyword[c]);
      if (!g.injected[c]) continue;
      g.negated[c] = rng.bernoulli(cfg.negation_probability);
      const auto& kw = pools[c][static_cast<std::size_t>(rng.below(pools[c].size()))];
      const auto tmpl = g.negated[c] ? kNegatedTemplates[static_cast<std::size_t>(rng.below(kNegatedTemplates.size()))]
                                     : kPlainTemplates[static_cast<std::size_t>(rng.below(kPlainTemplates.size()))];
      sentences.push_back(fill(tmpl, kw));
    }
    const double whole = std::floor(cfg.noise_tokens);
    std::size_t filler = static_cast<std::size_t>(whole) + (rng.bernoulli(cfg.noise_tokens - whole) ? 1 : 0);
    while (filler > 0) {
      const std::size_t len = std::min<std::size_t>(filler, 3 + static_cast<std::size_t>(rng.below(4)));
      std::string s;
      for (std::size_t w = 0; w < len; ++w) {
        if (w) s += ' ';
        s += kFiller[static_cast<std::size_t>(rng.below(kFiller.size()))];
      }
      s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
      sentences.push_back(s + '.');
      filler -= len;
    }
    rng.shuffle(sentences);
    // one or two free-text notes
    const std::size_t split = sentences.size() > 1 && rng.bernoulli(0.3)
                                  ? 1 + static_cast<std::size_t>(rng.below(sentences.size() - 1))
                                  : sentences.size();
    std::vector<std::string> parts(sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(split));
    r.notes.push_back(detail::join(parts, " "));
    if (split < sentences.size()) {
      parts.assign(sentences.begin() + static_cast<std::ptrdiff_t>(split), sentences.end());
      r.notes.push_back(detail::join(parts, " "));
    }
  });
  return out;
}

std::vector<RescueRecord> generate(const GeneratorConfig& cfg, const Lexicon& lexicon) {
  auto cases = generate_cases(cfg, lexicon);
  std::vector<RescueRecord> out;
  out.reserve(cases.size());
  for (auto& c : cases) out.push_back(std::move(c.record));
  return out;
}

std::string format_truth_csv(const std::vector<GeneratedCase>& cases) {
  std::ostringstream out;
  out << "case_id,label,systolic_bp,respiratory_rate,gcs,circulation_normal,pulse_rhythm_regular";
  for (Category c : kAllCategories) out << ',' << category_id(c) << "_injected";
  for (Category c : kAllCategories) out << ',' << category_id(c) << "_negated";
  out << '\n';
  for (const auto& g : cases) {
    const auto& v = g.record.vitals;
    out << g.record.case_id << ',' << to_string(g.record.label) << ',' << detail::format_number(*v.systolic_bp) << ','
        << detail::format_number(*v.respiratory_rate) << ',' << *v.gcs << ',' << (*v.circulation_normal ? 1 : 0)
        << ',' << (*v.pulse_rhythm_regular ? 1 : 0);
    for (bool b : g.injected) out << ',' << (b ? 1 : 0);
    for (bool b : g.negated) out << ',' << (b ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

struct Observation {
  double bp, rr, gcs;
  bool circ, pulse;
  std::array<bool, kCategoryCount> text;
};

Observation draw_observation(const ClassProfile& p, double negation, Rng& rng) {
  Observation o{};
  o.bp = p.systolic_bp.draw(rng);
  o.rr = p.respiratory_rate.draw(rng);
  o.gcs = p.gcs.draw(rng);
  o.circ = rng.bernoulli(p.circulation_normal);
  o.pulse = rng.bernoulli(p.pulse_rhythm_regular);
  for (std::size_t c = 0; c < kCategoryCount; ++c) o.text[c] = rng.bernoulli(p.keyword[c] * (1.0 - negation));
  return o;
}

double log_likelihood(const ClassProfile& p, double negation, const Observation& o) {
  auto lg = [](double v) { return std::log(std::max(v, 1e-300)); };
  auto bern = [&](bool x, double q) { return lg(x ? q : 1.0 - q); };
  double ll = lg(p.systolic_bp.pmf(o.bp)) + lg(p.respiratory_rate.pmf(o.rr)) + lg(p.gcs.pmf(o.gcs));
  ll += bern(o.circ, p.circulation_normal) + bern(o.pulse, p.pulse_rhythm_regular);
  for (std::size_t c = 0; c < kCategoryCount; ++c) ll += bern(o.text[c], p.keyword[c] * (1.0 - negation));
  return ll;
}

}  // namespace

OracleEstimate oracle_accuracy(const GeneratorConfig& cfg, std::size_t draws) {
  cfg.validate();
  const double n = static_cast<double>(cfg.n_psychiatric + cfg.n_nonpsychiatric);
  if (n == 0 || draws == 0) return {};
  const double prior = static_cast<double>(cfg.n_psychiatric) / n;
  const double log_prior_p = std::log(std::max(prior, 1e-300));
  const double log_prior_n = std::log(std::max(1.0 - prior, 1e-300));

  constexpr std::size_t kChunks = 64;
  std::vector<double> sum(kChunks, 0.0), sq(kChunks, 0.0);
  parallel_for(kChunks, [&](std::size_t chunk) {
    Rng rng = Rng::derive(Rng::mix(cfg.seed) ^ 0x0AC1E, chunk);
    const std::size_t lo = draws * chunk / kChunks, hi = draws * (chunk + 1) / kChunks;
    for (std::size_t i = lo; i < hi; ++i) {
      const bool psy = rng.bernoulli(prior);
      const auto o =
          draw_observation(psy ? cfg.psychiatric : cfg.non_psychiatric, cfg.negation_probability, rng);
      const double lp = log_prior_p + log_likelihood(cfg.psychiatric, cfg.negation_probability, o);
      const double ln = log_prior_n + log_likelihood(cfg.non_psychiatric, cfg.negation_probability, o);
      const double post = 1.0 / (1.0 + std::exp(-std::abs(lp - ln)));  // max posterior
      sum[chunk] += post;
      sq[chunk] += post * post;
    }
  });
  const double s = std::accumulate(sum.begin(), sum.end(), 0.0);
  const double q = std::accumulate(sq.begin(), sq.end(), 0.0);
  const double m = static_cast<double>(draws);
  OracleEstimate e;
  e.draws = draws;
  e.accuracy = s / m;
  const double var = std::max(0.0, q / m - e.accuracy * e.accuracy);
  e.standard_error = std::sqrt(var / m);
  return e;
}

std::vector<double> noise_probe(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x4E015E);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal();
  return out;
}

}  // namespace psytriage
