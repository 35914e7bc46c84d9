#include "psytriage/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "text_util.hpp"

namespace psytriage {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeVital: return "NegativeVital";
    case ErrorCode::GcsOutOfRange: return "GcsOutOfRange";
    case ErrorCode::EmptyCaseId: return "EmptyCaseId";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::MissingVital: return "MissingVital";
    case ErrorCode::MissingKeyColumn: return "MissingKeyColumn";
    case ErrorCode::TooFewValues: return "TooFewValues";
    case ErrorCode::AllOutliers: return "AllOutliers";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ColumnAllMissing: return "ColumnAllMissing";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::DegenerateFolds: return "DegenerateFolds";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Psychiatric: return "psychiatric";
    case Label::NonPsychiatric: return "non_psychiatric";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view token) {
  const std::string t = detail::lower_ascii(detail::trim(token));
  static const std::set<std::string> pos = {"psychiatric", "1", "true", "yes", "patient"};
  static const std::set<std::string> neg = {"non_psychiatric", "non-psychiatric", "nonpsychiatric",
                                            "0", "false", "no", "non_patient", "non-patient"};
  if (t.empty() || t == "unknown" || t == "na" || t == "?") return Label::Unknown;
  if (pos.contains(t)) return Label::Psychiatric;
  if (neg.contains(t)) return Label::NonPsychiatric;
  throw Error(ErrorCode::Parse, "unrecognized label '" + std::string(token) + "'");
}

// ---------------------------------------------------------------------------

Vitals::Vitals(double systolic_bp, double respiratory_rate, int gcs, bool circulation_normal,
               bool pulse_rhythm_regular)
    : systolic_bp_(systolic_bp),
      respiratory_rate_(respiratory_rate),
      gcs_(gcs),
      circulation_normal_(circulation_normal),
      pulse_rhythm_regular_(pulse_rhythm_regular) {
  if (!std::isfinite(systolic_bp) || systolic_bp <= 0)
    throw Error(ErrorCode::NegativeVital, "systolic_bp = " + detail::format_number(systolic_bp));
  if (!std::isfinite(respiratory_rate) || respiratory_rate <= 0)
    throw Error(ErrorCode::NegativeVital,
                "respiratory_rate = " + detail::format_number(respiratory_rate));
  if (gcs < 3 || gcs > 15)
    throw Error(ErrorCode::GcsOutOfRange, "gcs = " + std::to_string(gcs));
}

Vitals VitalsDraft::finalize() const {
  if (!systolic_bp) throw Error(ErrorCode::MissingVital, "systolic_bp");
  if (!respiratory_rate) throw Error(ErrorCode::MissingVital, "respiratory_rate");
  if (!gcs) throw Error(ErrorCode::MissingVital, "gcs");
  if (!circulation_normal) throw Error(ErrorCode::MissingVital, "circulation_normal");
  if (!pulse_rhythm_regular) throw Error(ErrorCode::MissingVital, "pulse_rhythm_regular");
  return Vitals(*systolic_bp, *respiratory_rate, *gcs, *circulation_normal, *pulse_rhythm_regular);
}

// ---------------------------------------------------------------------------

std::string_view category_id(Category c) {
  switch (c) {
    case Category::Preillness: return "preillness";
    case Category::Intoxication: return "intoxication";
    case Category::Alcoholism: return "alcoholism";
    case Category::MentalAbnormality: return "mental_abnormality";
    case Category::PsychiatricSymptoms: return "psychiatric_symptoms";
  }
  return "";
}

std::string_view category_title(Category c) {
  switch (c) {
    case Category::Preillness: return "Preillness";
    case Category::Intoxication: return "Intoxication";
    case Category::Alcoholism: return "Alcoholism";
    case Category::MentalAbnormality: return "Mental Abnormalities";
    case Category::PsychiatricSymptoms: return "Psychiatric Symptoms";
  }
  return "";
}

std::optional<Category> parse_category(std::string_view text) {
  std::string key = detail::lower_ascii(detail::trim(text));
  std::replace(key.begin(), key.end(), ' ', '_');
  for (Category c : kAllCategories) {
    std::string title = detail::lower_ascii(category_title(c));
    std::replace(title.begin(), title.end(), ' ', '_');
    if (key == category_id(c) || key == title) return c;
  }
  if (key == "mental_abnormalities") return Category::MentalAbnormality;
  return std::nullopt;
}

std::array<bool, kCategoryCount> TextFeatures::presence() const {
  std::array<bool, kCategoryCount> out{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) out[i] = slots[i].has_value();
  return out;
}

// ---------------------------------------------------------------------------

const std::array<std::string_view, FeatureVector::kSize>& FeatureVector::names() {
  static const std::array<std::string_view, kSize> kNames = {
      "gcs",        "circulation_normal", "systolic_bp", "pulse_rhythm_regular",
      "respiratory_rate", "preillness",   "intoxication", "alcoholism",
      "mental_abnormality", "psychiatric_symptoms"};
  return kNames;
}

std::size_t FeatureVector::index_of(std::string_view name) {
  const auto& n = names();
  auto it = std::find(n.begin(), n.end(), name);
  if (it == n.end()) throw Error(ErrorCode::MissingFeature, std::string(name));
  return static_cast<std::size_t>(it - n.begin());
}

FeatureVector::FeatureVector(const std::array<double, kSize>& values) : values_(values) {
  for (std::size_t i : {1u, 3u, 5u, 6u, 7u, 8u, 9u}) {
    if (values[i] != 0.0 && values[i] != 1.0)
      throw Error(ErrorCode::InvalidValue, std::string(names()[i]) + " must be 0 or 1, got " +
                                               detail::format_number(values[i]));
  }
  if (values[0] != std::round(values[0]))
    throw Error(ErrorCode::InvalidValue, "gcs must be integral");
  (void)decode(*this);  // vitals invariants
}

FeatureVector to_feature_vector(const Vitals& v, const TextFeatures& text) {
  std::array<double, FeatureVector::kSize> a{};
  a[0] = v.gcs();
  a[1] = v.circulation_normal() ? 1.0 : 0.0;
  a[2] = v.systolic_bp();
  a[3] = v.pulse_rhythm_regular() ? 1.0 : 0.0;
  a[4] = v.respiratory_rate();
  const auto present = text.presence();
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    a[FeatureVector::kFirstText + i] = present[i] ? 1.0 : 0.0;
  return FeatureVector(a);
}

FeatureVector to_feature_vector(const VitalsDraft& vitals, const TextFeatures& text) {
  return to_feature_vector(vitals.finalize(), text);
}

DecodedFeatures decode(const FeatureVector& fv) {
  const auto& a = fv.values();
  Vitals v(a[2], a[4], static_cast<int>(a[0]), a[1] != 0.0, a[3] != 0.0);
  std::array<bool, kCategoryCount> present{};
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    present[i] = a[FeatureVector::kFirstText + i] != 0.0;
  return {v, present};
}

// ---------------------------------------------------------------------------

std::map<std::string, bool> RecordSchema::default_circulation_tokens() {
  // "3" appears alongside "0" for abnormal-looking rows in the sample export;
  // its meaning is undocumented, so it maps to abnormal by default.
  return {{"normal", true},    {"1", true},      {"true", true},  {"yes", true},
          {"abnormal", false}, {"0", false},     {"false", false}, {"no", false},
          {"3", false},        {"normal circulation", true}};
}

std::map<std::string, bool> RecordSchema::default_pulse_tokens() {
  return {{"regular", true}, {"1", true},  {"true", true},   {"yes", true},
          {"irregular", false}, {"0", false}, {"false", false}, {"no", false}};
}

std::string FieldError::message() const {
  return std::string(to_string(code)) + "(" + field + (value.empty() ? "" : " = " + value) + ")";
}

namespace {

std::string first_part(const std::string& cell) {
  auto pos = cell.find(',');
  return detail::trim(pos == std::string::npos ? cell : cell.substr(0, pos));
}

std::optional<double> parse_number(const std::string& text) {
  double v = 0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

}  // namespace

ValidationResult validate_record(const RawFields& raw, const RecordSchema& schema) {
  ValidationResult result;
  RescueRecord rec;
  auto cell = [&](const std::string& col) -> std::string {
    auto it = raw.find(col);
    return it == raw.end() ? std::string() : detail::trim(it->second);
  };
  auto add = [&](ErrorCode code, const std::string& field, const std::string& value) {
    result.errors.push_back({code, field, value});
  };

  rec.case_id = cell(schema.case_id);
  if (rec.case_id.empty()) add(ErrorCode::EmptyCaseId, schema.case_id, "");

  auto positive = [&](const std::string& col, std::optional<double>& slot) {
    const std::string text = first_part(cell(col));
    if (text.empty()) return;
    auto v = parse_number(text);
    if (!v || !std::isfinite(*v)) return add(ErrorCode::InvalidValue, col, text);
    if (*v <= 0) return add(ErrorCode::NegativeVital, col, text);
    slot = *v;
  };
  positive(schema.systolic_bp, rec.vitals.systolic_bp);
  positive(schema.respiratory_rate, rec.vitals.respiratory_rate);

  if (const std::string text = first_part(cell(schema.gcs)); !text.empty()) {
    auto v = parse_number(text);
    if (!v || *v != std::round(*v)) {
      add(ErrorCode::InvalidValue, schema.gcs, text);
    } else if (*v < 3 || *v > 15) {
      add(ErrorCode::GcsOutOfRange, schema.gcs, text);
    } else {
      rec.vitals.gcs = static_cast<int>(*v);
    }
  }

  auto flag = [&](const std::string& col, const std::map<std::string, bool>& tokens,
                  std::optional<bool>& slot) {
    const std::string text = detail::lower_ascii(first_part(cell(col)));
    if (text.empty()) return;
    auto it = tokens.find(text);
    if (it == tokens.end()) return add(ErrorCode::InvalidValue, col, text);
    slot = it->second;
  };
  flag(schema.circulation, schema.circulation_tokens, rec.vitals.circulation_normal);
  flag(schema.pulse_rhythm, schema.pulse_tokens, rec.vitals.pulse_rhythm_regular);

  for (const auto& col : schema.note_columns) {
    auto it = raw.find(col);
    if (it != raw.end() && !detail::trim(it->second).empty()) rec.notes.push_back(it->second);
  }

  try {
    rec.label = parse_label(cell(schema.label));
  } catch (const Error&) {
    add(ErrorCode::InvalidValue, schema.label, cell(schema.label));
  }

  if (result.errors.empty()) result.record = std::move(rec);
  return result;
}

std::vector<FieldError> check_record(const RescueRecord& r) {
  std::vector<FieldError> errors;
  if (r.case_id.empty()) errors.push_back({ErrorCode::EmptyCaseId, "case_id", ""});
  const auto& v = r.vitals;
  if (v.systolic_bp && !(*v.systolic_bp > 0))
    errors.push_back({ErrorCode::NegativeVital, "systolic_bp", detail::format_number(*v.systolic_bp)});
  if (v.respiratory_rate && !(*v.respiratory_rate > 0))
    errors.push_back(
        {ErrorCode::NegativeVital, "respiratory_rate", detail::format_number(*v.respiratory_rate)});
  if (v.gcs && (*v.gcs < 3 || *v.gcs > 15))
    errors.push_back({ErrorCode::GcsOutOfRange, "gcs", std::to_string(*v.gcs)});
  return errors;
}

// ---------------------------------------------------------------------------

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

bool Dataset::has_both_classes() const {
  const auto p = positives();
  return p > 0 && p < labels.size();
}

Dataset Dataset::select_rows(std::span<const std::size_t> idx) const {
  Dataset out;
  out.feature_names = feature_names;
  out.rows.reserve(idx.size());
  out.labels.reserve(idx.size());
  for (auto i : idx) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset Dataset::select_columns(std::span<const std::size_t> cols) const {
  Dataset out;
  for (auto c : cols) out.feature_names.push_back(feature_names.at(c));
  out.labels = labels;
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> row;
    row.reserve(cols.size());
    for (auto c : cols) row.push_back(r[c]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

Dataset Dataset::select_columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto c = column_index(n);
    if (!c) throw Error(ErrorCode::MissingFeature, n);
    cols.push_back(*c);
  }
  return select_columns(cols);
}

std::vector<double> Dataset::column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

std::optional<std::size_t> Dataset::column_index(std::string_view name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - feature_names.begin());
}

void Dataset::check_shape() const {
  if (rows.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(rows.size()) + " rows vs " +
                                               std::to_string(labels.size()) + " labels");
  for (const auto& r : rows)
    if (r.size() != feature_names.size())
      throw Error(ErrorCode::ArityMismatch, "row has " + std::to_string(r.size()) +
                                                " values, expected " +
                                                std::to_string(feature_names.size()));
}

}  // namespace psytriage
