#pragma once

// Canonical JSON forms of the core records.
//
// RescueRecord (one object per JSONL line):
//   {"case_id": "SYN-000001",
//    "vitals": {"systolic_bp": 130, "respiratory_rate": 16, "gcs": 15,
//               "circulation_normal": true, "pulse_rhythm_regular": false},
//    "notes": ["..."],
//    "label": "psychiatric" | "non_psychiatric" | "unknown"}
// Absent vitals are null.
//
// Case features (output of feature extraction):
//   {"case_id": "...", "label": "...",
//    "text_features": {"preillness": null, "alcoholism": "drunk", ...},
//    "features": {"gcs": 15, "circulation_normal": 1, ...}}
// "features" keys follow FeatureVector::names() order.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "psytriage/core.hpp"

namespace psytriage {

using json = nlohmann::ordered_json;

json to_json(const RescueRecord& r);
RescueRecord record_from_json(const json& j);

json to_json(const TextFeatures& t);
TextFeatures text_features_from_json(const json& j);

json to_json(const FeatureVector& fv);
FeatureVector feature_vector_from_json(const json& j);

json to_json(const ConfusionMatrix& cm);
json to_json(const RelevanceScore& s);

struct CaseFeatures {
  std::string case_id;
  Label label = Label::Unknown;
  TextFeatures text;
  FeatureVector features;
  friend bool operator==(const CaseFeatures&, const CaseFeatures&) = default;
};

json to_json(const CaseFeatures& c);
CaseFeatures case_features_from_json(const json& j);

/// Dataset over the given feature names; Unknown-labelled cases are skipped.
Dataset to_dataset(const std::vector<CaseFeatures>& cases, const std::vector<std::string>& names);

// JSONL helpers. Readers throw Parse with the line number on malformed input.
std::vector<json> read_jsonl(std::istream& in);
std::vector<json> read_jsonl_file(const std::filesystem::path& path);
void write_jsonl(std::ostream& out, const std::vector<json>& lines);
void write_jsonl_file(const std::filesystem::path& path, const std::vector<json>& lines);

std::vector<RescueRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<RescueRecord>& records);
std::vector<CaseFeatures> read_case_features(const std::filesystem::path& path);
void write_case_features(const std::filesystem::path& path, const std::vector<CaseFeatures>& cases);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace psytriage
