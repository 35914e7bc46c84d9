#include "psytriage/json_io.hpp"

#include <fstream>
#include <sstream>

namespace psytriage {

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json to_json(const RescueRecord& r) {
  json v = json::object();
  v["systolic_bp"] = opt(r.vitals.systolic_bp);
  v["respiratory_rate"] = opt(r.vitals.respiratory_rate);
  v["gcs"] = opt(r.vitals.gcs);
  v["circulation_normal"] = opt(r.vitals.circulation_normal);
  v["pulse_rhythm_regular"] = opt(r.vitals.pulse_rhythm_regular);
  json j = json::object();
  j["case_id"] = r.case_id;
  j["vitals"] = std::move(v);
  j["notes"] = r.notes;
  j["label"] = std::string(to_string(r.label));
  return j;
}

RescueRecord record_from_json(const json& j) {
  try {
    RescueRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    if (j.contains("vitals") && !j.at("vitals").is_null()) {
      const auto& v = j.at("vitals");
      r.vitals.systolic_bp = opt_get<double>(v, "systolic_bp");
      r.vitals.respiratory_rate = opt_get<double>(v, "respiratory_rate");
      r.vitals.gcs = opt_get<int>(v, "gcs");
      r.vitals.circulation_normal = opt_get<bool>(v, "circulation_normal");
      r.vitals.pulse_rhythm_regular = opt_get<bool>(v, "pulse_rhythm_regular");
    }
    if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
    r.label = parse_label(j.value("label", std::string("unknown")));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("rescue record: ") + e.what());
  }
}

json to_json(const TextFeatures& t) {
  json j = json::object();
  for (Category c : kAllCategories) j[std::string(category_id(c))] = opt(t[c]);
  return j;
}

TextFeatures text_features_from_json(const json& j) {
  TextFeatures t;
  for (Category c : kAllCategories) t[c] = opt_get<std::string>(j, std::string(category_id(c)).c_str());
  return t;
}

json to_json(const FeatureVector& fv) {
  json j = json::object();
  const auto& names = FeatureVector::names();
  for (std::size_t i = 0; i < FeatureVector::kSize; ++i) j[std::string(names[i])] = fv[i];
  return j;
}

FeatureVector feature_vector_from_json(const json& j) {
  std::array<double, FeatureVector::kSize> a{};
  const auto& names = FeatureVector::names();
  for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
    const std::string key(names[i]);
    if (!j.contains(key)) throw Error(ErrorCode::MissingFeature, key);
    a[i] = j.at(key).get<double>();
  }
  return FeatureVector(a);
}

json to_json(const ConfusionMatrix& cm) {
  return json{{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

json to_json(const RelevanceScore& s) {
  json j = json::object();
  j["feature"] = s.feature_name;
  j["observed_mean"] = s.observed_mean;
  j["reference_mean"] = s.reference_mean;
  j["score"] = opt(s.score);
  j["relative_deviation_percent"] = opt(s.percent);
  j["zero_reference"] = s.zero_reference;
  return j;
}

json to_json(const CaseFeatures& c) {
  json j = json::object();
  j["case_id"] = c.case_id;
  j["label"] = std::string(to_string(c.label));
  j["text_features"] = to_json(c.text);
  j["features"] = to_json(c.features);
  return j;
}

CaseFeatures case_features_from_json(const json& j) {
  try {
    CaseFeatures c;
    c.case_id = j.at("case_id").get<std::string>();
    c.label = parse_label(j.value("label", std::string("unknown")));
    if (j.contains("text_features")) c.text = text_features_from_json(j.at("text_features"));
    c.features = feature_vector_from_json(j.at("features"));
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("case features: ") + e.what());
  }
}

Dataset to_dataset(const std::vector<CaseFeatures>& cases, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(FeatureVector::index_of(n));
  Dataset d;
  d.feature_names = names;
  for (const auto& c : cases) {
    if (c.label == Label::Unknown) continue;
    std::vector<double> row;
    row.reserve(idx.size());
    for (auto i : idx) row.push_back(c.features[i]);
    d.rows.push_back(std::move(row));
    d.labels.push_back(label_bit(c.label));
  }
  return d;
}

// ---------------------------------------------------------------------------

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<json> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<json>& lines) {
  for (const auto& j : lines) out << j.dump() << '\n';
}

void write_jsonl_file(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_jsonl(out, lines);
}

std::vector<RescueRecord> read_records(const std::filesystem::path& path) {
  std::vector<RescueRecord> out;
  for (const auto& j : read_jsonl_file(path)) out.push_back(record_from_json(j));
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<RescueRecord>& records) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r));
  write_jsonl_file(path, lines);
}

std::vector<CaseFeatures> read_case_features(const std::filesystem::path& path) {
  std::vector<CaseFeatures> out;
  for (const auto& j : read_jsonl_file(path)) out.push_back(case_features_from_json(j));
  return out;
}

void write_case_features(const std::filesystem::path& path, const std::vector<CaseFeatures>& cases) {
  std::vector<json> lines;
  lines.reserve(cases.size());
  for (const auto& c : cases) lines.push_back(to_json(c));
  write_jsonl_file(path, lines);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace psytriage
