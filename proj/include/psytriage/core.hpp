#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psytriage/error.hpp"

namespace psytriage {

enum class Label { Psychiatric, NonPsychiatric, Unknown };

std::string_view to_string(Label label);
Label parse_label(std::string_view token);  // throws Parse on unknown spellings

/// Complete, validated vital signs. Invariants are enforced at construction.
class Vitals {
 public:
  Vitals(double systolic_bp, double respiratory_rate, int gcs, bool circulation_normal,
         bool pulse_rhythm_regular);

  double systolic_bp() const { return systolic_bp_; }
  double respiratory_rate() const { return respiratory_rate_; }
  int gcs() const { return gcs_; }
  bool circulation_normal() const { return circulation_normal_; }
  bool pulse_rhythm_regular() const { return pulse_rhythm_regular_; }

  friend bool operator==(const Vitals&, const Vitals&) = default;

 private:
  double systolic_bp_;
  double respiratory_rate_;
  int gcs_;
  bool circulation_normal_;
  bool pulse_rhythm_regular_;
};

/// Vital signs as recorded, before imputation. Any field may be absent.
struct VitalsDraft {
  std::optional<double> systolic_bp;
  std::optional<double> respiratory_rate;
  std::optional<int> gcs;
  std::optional<bool> circulation_normal;
  std::optional<bool> pulse_rhythm_regular;

  bool complete() const {
    return systolic_bp && respiratory_rate && gcs && circulation_normal && pulse_rhythm_regular;
  }
  /// Throws MissingVital naming the first absent field.
  Vitals finalize() const;

  static VitalsDraft from(const Vitals& v) {
    return {v.systolic_bp(), v.respiratory_rate(), v.gcs(), v.circulation_normal(),
            v.pulse_rhythm_regular()};
  }

  friend bool operator==(const VitalsDraft&, const VitalsDraft&) = default;
};

struct RescueRecord {
  std::string case_id;
  VitalsDraft vitals;
  std::vector<std::string> notes;
  Label label = Label::Unknown;

  friend bool operator==(const RescueRecord&, const RescueRecord&) = default;
};

// ---------------------------------------------------------------------------
// Text categories

enum class Category { Preillness, Intoxication, Alcoholism, MentalAbnormality, PsychiatricSymptoms };

inline constexpr std::size_t kCategoryCount = 5;
inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::Preillness, Category::Intoxication, Category::Alcoholism,
    Category::MentalAbnormality, Category::PsychiatricSymptoms};

/// snake_case identifier used in files and feature names ("mental_abnormality").
std::string_view category_id(Category c);
/// Display name as printed in the category table ("Mental Abnormalities").
std::string_view category_title(Category c);
std::optional<Category> parse_category(std::string_view text);

/// One slot per category; a populated slot holds the matched keyword.
struct TextFeatures {
  std::array<std::optional<std::string>, kCategoryCount> slots;

  std::optional<std::string>& operator[](Category c) { return slots[static_cast<std::size_t>(c)]; }
  const std::optional<std::string>& operator[](Category c) const {
    return slots[static_cast<std::size_t>(c)];
  }
  std::array<bool, kCategoryCount> presence() const;

  friend bool operator==(const TextFeatures&, const TextFeatures&) = default;
};

// ---------------------------------------------------------------------------
// Feature vector

/// The ten model inputs in fixed order:
///   0 gcs, 1 circulation_normal, 2 systolic_bp, 3 pulse_rhythm_regular,
///   4 respiratory_rate, 5 preillness, 6 intoxication, 7 alcoholism,
///   8 mental_abnormality, 9 psychiatric_symptoms.
/// Booleans are encoded as 0/1.
class FeatureVector {
 public:
  static constexpr std::size_t kSize = 10;
  static constexpr std::size_t kFirstText = 5;
  static const std::array<std::string_view, kSize>& names();
  static std::size_t index_of(std::string_view name);  // throws MissingFeature

  FeatureVector() = default;
  /// Throws InvalidValue if a boolean slot is not 0/1 or the vitals slots are invalid.
  explicit FeatureVector(const std::array<double, kSize>& values);

  const std::array<double, kSize>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::array<double, kSize> values_{};
};

FeatureVector to_feature_vector(const Vitals& vitals, const TextFeatures& text);
/// Throws MissingVital if the draft is incomplete.
FeatureVector to_feature_vector(const VitalsDraft& vitals, const TextFeatures& text);

struct DecodedFeatures {
  Vitals vitals;
  std::array<bool, kCategoryCount> text_presence;
  friend bool operator==(const DecodedFeatures&, const DecodedFeatures&) = default;
};
DecodedFeatures decode(const FeatureVector& fv);

// ---------------------------------------------------------------------------
// Record validation

/// Column names used to read a raw row into a record, plus token maps.
struct RecordSchema {
  std::string case_id = "case_id";
  std::string systolic_bp = "systolic_bp";
  std::string respiratory_rate = "respiratory_rate";
  std::string gcs = "gcs";
  std::string circulation = "circulation";
  std::string pulse_rhythm = "pulse_rhythm";
  std::string label = "label";
  std::vector<std::string> note_columns = {"notes"};
  /// Lowercased raw token -> normality flag.
  std::map<std::string, bool> circulation_tokens = default_circulation_tokens();
  std::map<std::string, bool> pulse_tokens = default_pulse_tokens();

  static std::map<std::string, bool> default_circulation_tokens();
  static std::map<std::string, bool> default_pulse_tokens();
};

using RawFields = std::map<std::string, std::string>;

struct FieldError {
  ErrorCode code;
  std::string field;
  std::string value;
  std::string message() const;
};

struct ValidationResult {
  std::optional<RescueRecord> record;
  std::vector<FieldError> errors;
  bool ok() const { return errors.empty(); }
};

/// Builds a record from one raw row, collecting every violation. Empty cells
/// are missing values; a merged multi-value numeric cell ("130,142") uses its
/// first reading.
ValidationResult validate_record(const RawFields& raw, const RecordSchema& schema = {});

/// Invariant check on an already-built record (same rules as validate_record).
std::vector<FieldError> check_record(const RescueRecord& record);

// ---------------------------------------------------------------------------
// Evaluation / selection value types

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct RelevanceScore {
  std::string feature_name;
  double observed_mean = 0.0;   // mean occurrence among psychiatric cases
  double reference_mean = 0.0;  // mean occurrence among the reference pool
  std::optional<double> score;         // |x - y| / |y|, absent when reference_mean == 0
  std::optional<double> percent;       // score * 100
  bool zero_reference = false;
};

// ---------------------------------------------------------------------------
// Model-ready tabular data

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;  // 1 = psychiatric, 0 = not

  std::size_t size() const { return rows.size(); }
  std::size_t arity() const { return feature_names.size(); }
  std::size_t positives() const;
  bool has_both_classes() const;

  Dataset select_rows(std::span<const std::size_t> idx) const;
  Dataset select_columns(std::span<const std::size_t> cols) const;
  Dataset select_columns(const std::vector<std::string>& names) const;
  std::vector<double> column(std::size_t j) const;
  std::optional<std::size_t> column_index(std::string_view name) const;

  /// Throws LengthMismatch / ArityMismatch on ragged input.
  void check_shape() const;
};

inline int label_bit(Label l) { return l == Label::Psychiatric ? 1 : 0; }

}  // namespace psytriage
