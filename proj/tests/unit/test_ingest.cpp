#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "psytriage/ingest.hpp"
#include "psytriage/json_io.hpp"

using namespace psytriage;

namespace {

bool has_code(const std::vector<FieldError>& errs, ErrorCode c) {
  return std::any_of(errs.begin(), errs.end(), [&](const FieldError& e) { return e.code == c; });
}

Table csv(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

}  // namespace

TEST_CASE("CSV reader handles quotes, embedded newlines and short rows") {
  const auto t = csv("\xEF\xBB\xBF" "a,b,c\n1,\"x, \"\"y\"\"\",\"two\nlines\"\n2,3\n");
  CHECK(t.columns == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x, \"y\"");
  CHECK(t.rows[0][2] == "two\nlines");
  CHECK(t.rows[1] == std::vector<std::string>{"2", "3", ""});
  std::ostringstream out;
  write_csv(out, t);
  CHECK(csv(out.str()) == t);
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(quantile_sorted(s, 0.0) == 1);
  CHECK(quantile_sorted(s, 0.5) == 2.5);
  CHECK(quantile_sorted(s, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_sorted(s, 1.0) == 4);
}

TEST_CASE("IQR replacement: hand case") {
  const std::vector<double> v{1, 2, 3, 4, 100};
  const auto r = iqr_filter(v);
  CHECK(r.q1 == 2);
  CHECK(r.q3 == 4);
  CHECK(r.lower_fence == -1);
  CHECK(r.upper_fence == 7);
  CHECK(r.outlier_indices == std::vector<std::size_t>{4});
  CHECK(r.replacement == 2.5);
  CHECK(r.cleaned == std::vector<double>{1, 2, 3, 4, 2.5});
  CHECK_THROWS_AS(iqr_filter(std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("merging tables by case key") {
  IngestConfig cfg;
  const auto a = csv("case_id,systolic_bp\nA,130\nB,120\n");
  const auto b = csv("case_id,systolic_bp,notes\nA,142,x\nA,130,y\nC,110,z\n");
  const auto m = merge_cases({a, b}, cfg);
  CHECK(m.columns == std::vector<std::string>{"case_id", "systolic_bp", "notes"});
  REQUIRE(m.rows.size() == 3);
  CHECK(m.rows[0] == std::vector<std::string>{"A", "130,142", "x,y"});
  CHECK(m.rows[1] == std::vector<std::string>{"B", "120", ""});
  CHECK(m.rows[2] == std::vector<std::string>{"C", "110", "z"});
  CHECK_THROWS_AS(merge_cases({csv("id,x\n1,2\n")}, cfg), Error);
}

TEST_CASE("duplicate columns are reduced") {
  IngestConfig cfg;
  cfg.drop_columns = {"junk"};
  const auto t = csv("case_id,x,junk,x_copy\n1,5,a,5\n2,6,b,6\n");
  const auto r = reduce_columns(t, cfg);
  CHECK(r.table.columns == std::vector<std::string>{"case_id", "x"});
  CHECK(!r.log.empty());
}

TEST_CASE("record validation collects every violation") {
  RawFields raw{{"case_id", "c1"},   {"systolic_bp", "-5"},    {"respiratory_rate", "12"},
                {"gcs", "20"},       {"circulation", "normal"}, {"pulse_rhythm", "regular"},
                {"label", "psychiatric"}, {"notes", "drunk"}};
  const auto r = validate_record(raw);
  CHECK(!r.ok());
  CHECK(has_code(r.errors, ErrorCode::NegativeVital));
  CHECK(has_code(r.errors, ErrorCode::GcsOutOfRange));

  raw["systolic_bp"] = "130,142";
  raw["gcs"] = "15";
  const auto ok = validate_record(raw);
  REQUIRE(ok.ok());
  CHECK(*ok.record->vitals.systolic_bp == 130);
  CHECK(ok.record->label == Label::Psychiatric);

  raw["case_id"] = "";
  CHECK(has_code(validate_record(raw).errors, ErrorCode::EmptyCaseId));
}

TEST_CASE("full ingest chain") {
  IngestConfig cfg;
  const auto t = csv(
      "case_id,systolic_bp,respiratory_rate,gcs,circulation,pulse_rhythm,label,notes\n"
      "1,130,14,15,normal,regular,psychiatric,\"crying (devastated)\"\n"
      "2,,16,15,abnormal,irregular,non_psychiatric,fall\n"
      "3,125,-4,14,normal,regular,psychiatric,drunk\n"
      "4,900,15,15,normal,regular,non_psychiatric,ok\n"
      "5,135,15,13,normal,regular,non_psychiatric,ok\n"
      "6,128,17,15,,regular,psychiatric,ok\n");
  const auto r = run_ingest({t}, cfg);
  std::vector<std::string> ids;
  for (const auto& rec : r.records) ids.push_back(rec.case_id);
  // row 6 lacks a boolean that is never imputed
  CHECK(std::find(ids.begin(), ids.end(), "1") != ids.end());
  const auto& first = r.records.front();
  CHECK(first.notes.front().find('(') == std::string::npos);
  // the missing blood pressure is imputed, the outlier replaced
  for (const auto& rec : r.records) {
    if (rec.case_id == "2") CHECK(rec.vitals.systolic_bp.has_value());
    if (rec.case_id == "4") CHECK(*rec.vitals.systolic_bp < 900);
    if (rec.case_id == "3") CHECK(*rec.vitals.respiratory_rate >= 0);
  }
  CHECK(!r.log.empty());
}

TEST_CASE("records and features round-trip through JSON") {
  RescueRecord r{"c9", VitalsDraft{120.0, 14.0, 15, true, std::nullopt}, {"a", "b"}, Label::NonPsychiatric};
  CHECK(record_from_json(to_json(r)) == r);
  TextFeatures t;
  t[Category::Alcoholism] = "vodka";
  CHECK(text_features_from_json(to_json(t)) == t);
  const FeatureVector fv({15, 1, 120, 0, 14, 0, 0, 1, 0, 0});
  CHECK(feature_vector_from_json(to_json(fv)) == fv);
  CHECK_THROWS_AS(FeatureVector({15, 2, 120, 0, 14, 0, 0, 1, 0, 0}), Error);
}
