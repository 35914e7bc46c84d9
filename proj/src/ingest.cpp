#include "psytriage/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "text_util.hpp"

namespace psytriage {

namespace {

std::optional<double> parse_number(std::string_view text) {
  const std::string t = detail::trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string_view type_name(ColumnType t) {
  switch (t) {
    case ColumnType::Numeric: return "numeric";
    case ColumnType::Integer: return "integer";
    case ColumnType::Text: return "text";
    case ColumnType::Boolean: return "boolean";
  }
  return "text";
}

ColumnType parse_type(const std::string& s) {
  for (auto t : {ColumnType::Numeric, ColumnType::Integer, ColumnType::Text, ColumnType::Boolean})
    if (s == type_name(t)) return t;
  throw Error(ErrorCode::InvalidConfig, "unknown column type '" + s + "'");
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

ColumnType type_of(const IngestConfig& cfg, const std::string& column) {
  auto it = cfg.column_types.find(column);
  return it == cfg.column_types.end() ? ColumnType::Text : it->second;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '_'; }

std::string replace_word_ci(const std::string& text, const std::string& from, const std::string& to) {
  if (from.empty()) return text;
  const std::string lower = detail::lower_utf8(text);
  const std::string needle = detail::lower_utf8(from);
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto pos = lower.find(needle, i);
    if (pos == std::string::npos) break;
    const bool left_ok = pos == 0 || !is_word_char(static_cast<unsigned char>(lower[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool right_ok = end >= lower.size() || !is_word_char(static_cast<unsigned char>(lower[end]));
    if (left_ok && right_ok) {
      out.append(text, i, pos - i);
      out += to;
    } else {
      out.append(text, i, end - i);
    }
    i = end;
  }
  out.append(text, i, std::string::npos);
  return out;
}

std::string strip_marks(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (c != '"' && c != '(' && c != ')' && c != '[' && c != ']' && c != '{' && c != '}')
      out.push_back(c);
  return out;
}

}  // namespace

std::map<std::string, ColumnType> IngestConfig::default_column_types() {
  return {{"systolic_bp", ColumnType::Numeric},   {"respiratory_rate", ColumnType::Numeric},
          {"gcs", ColumnType::Integer},           {"circulation", ColumnType::Boolean},
          {"pulse_rhythm", ColumnType::Boolean},  {"pulse_rate", ColumnType::Numeric},
          {"notes", ColumnType::Text}};
}

void IngestConfig::validate() const {
  if (!(iqr_multiplier > 0))
    throw Error(ErrorCode::InvalidConfig, "iqr_multiplier must be > 0");
  if (key_column.empty()) throw Error(ErrorCode::InvalidConfig, "key_column is empty");
  if (contains(drop_columns, key_column))
    throw Error(ErrorCode::InvalidConfig, "key column '" + key_column + "' is in drop_columns");
}

IngestConfig ingest_config_from_json(const json& j) {
  IngestConfig cfg;
  try {
    cfg.key_column = j.value("key_column", cfg.key_column);
    cfg.drop_columns = j.value("drop_columns", cfg.drop_columns);
    if (j.contains("column_types")) {
      for (auto& [k, v] : j.at("column_types").items()) cfg.column_types[k] = parse_type(v.get<std::string>());
    }
    cfg.iqr_multiplier = j.value("iqr_multiplier", cfg.iqr_multiplier);
    cfg.iqr_columns = j.value("iqr_columns", cfg.iqr_columns);
    cfg.negative_forbidden_columns = j.value("negative_forbidden_columns", cfg.negative_forbidden_columns);
    if (j.contains("text_aliases"))
      cfg.text_aliases = j.at("text_aliases").get<std::map<std::string, std::string>>();
    if (j.contains("delimiter")) {
      const auto d = j.at("delimiter").get<std::string>();
      if (d.size() != 1) throw Error(ErrorCode::InvalidConfig, "delimiter must be one character");
      cfg.delimiter = d[0];
    }
    if (j.contains("circulation_normalization")) {
      cfg.schema.circulation_tokens.clear();
      for (auto& [k, v] : j.at("circulation_normalization").items())
        cfg.schema.circulation_tokens[detail::lower_ascii(k)] = v.is_boolean() ? v.get<bool>() : v.get<int>() != 0;
    }
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      auto& s = cfg.schema;
      s.case_id = c.value("case_id", s.case_id);
      s.systolic_bp = c.value("systolic_bp", s.systolic_bp);
      s.respiratory_rate = c.value("respiratory_rate", s.respiratory_rate);
      s.gcs = c.value("gcs", s.gcs);
      s.circulation = c.value("circulation", s.circulation);
      s.pulse_rhythm = c.value("pulse_rhythm", s.pulse_rhythm);
      s.label = c.value("label", s.label);
      s.note_columns = c.value("notes", s.note_columns);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("ingest config: ") + e.what());
  }
  cfg.schema.case_id = j.value("key_column", cfg.schema.case_id);
  cfg.validate();
  return cfg;
}

json to_json(const IngestConfig& cfg) {
  json j = json::object();
  j["key_column"] = cfg.key_column;
  j["drop_columns"] = cfg.drop_columns;
  json types = json::object();
  for (const auto& [k, v] : cfg.column_types) types[k] = std::string(type_name(v));
  j["column_types"] = types;
  j["iqr_multiplier"] = cfg.iqr_multiplier;
  j["iqr_columns"] = cfg.iqr_columns;
  j["negative_forbidden_columns"] = cfg.negative_forbidden_columns;
  j["text_aliases"] = cfg.text_aliases;
  j["delimiter"] = std::string(1, cfg.delimiter);
  j["circulation_normalization"] = cfg.schema.circulation_tokens;
  const auto& s = cfg.schema;
  j["columns"] = json{{"case_id", s.case_id},         {"systolic_bp", s.systolic_bp},
                      {"respiratory_rate", s.respiratory_rate}, {"gcs", s.gcs},
                      {"circulation", s.circulation}, {"pulse_rhythm", s.pulse_rhythm},
                      {"label", s.label},             {"notes", s.note_columns}};
  return j;
}

// ---------------------------------------------------------------------------

Table merge_cases(const std::vector<Table>& tables, const IngestConfig& cfg) {
  Table out;
  std::unordered_map<std::string, std::size_t> col_index;
  auto column = [&](const std::string& name) {
    auto [it, inserted] = col_index.try_emplace(name, out.columns.size());
    if (inserted) out.columns.push_back(name);
    return it->second;
  };
  column(cfg.key_column);

  // cells[row][col] -> distinct values in first-seen order
  std::vector<std::vector<std::vector<std::string>>> cells;
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<std::string> keys;

  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& table = tables[t];
    const auto key_col = table.index_of(cfg.key_column);
    if (!key_col)
      throw Error(ErrorCode::MissingKeyColumn,
                  "table " + std::to_string(t) + " lacks '" + cfg.key_column + "'");
    std::vector<std::size_t> map_cols;
    for (const auto& c : table.columns) map_cols.push_back(column(c));
    for (const auto& row : table.rows) {
      const std::string key = detail::trim(row[*key_col]);
      if (key.empty()) continue;
      auto [it, inserted] = row_of.try_emplace(key, cells.size());
      if (inserted) {
        cells.emplace_back();
        keys.push_back(key);
      }
      auto& target = cells[it->second];
      for (std::size_t c = 0; c < row.size(); ++c) {
        const std::size_t oc = map_cols[c];
        if (oc == 0) continue;
        if (target.size() <= oc) target.resize(oc + 1);
        const std::string value = detail::trim(row[c]);
        if (value.empty()) continue;
        auto& vals = target[oc];
        if (std::find(vals.begin(), vals.end(), value) == vals.end()) vals.push_back(value);
      }
    }
  }

  out.rows.reserve(keys.size());
  for (std::size_t r = 0; r < keys.size(); ++r) {
    std::vector<std::string> row(out.columns.size());
    row[0] = keys[r];
    for (std::size_t c = 1; c < cells[r].size(); ++c) row[c] = detail::join(cells[r][c], ",");
    out.rows.push_back(std::move(row));
  }
  return out;
}

ReduceResult reduce_columns(const Table& table, const IngestConfig& cfg) {
  ReduceResult result;
  std::vector<std::size_t> keep;
  const auto key = table.index_of(cfg.key_column);
  if (key) keep.push_back(*key);
  auto same = [&](std::size_t a, std::size_t b) {
    return std::all_of(table.rows.begin(), table.rows.end(),
                       [&](const auto& row) { return row[a] == row[b]; });
  };
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (key && c == *key) continue;
    const auto& name = table.columns[c];
    if (contains(cfg.drop_columns, name)) {
      result.log.push_back("dropped column '" + name + "' (configured)");
      continue;
    }
    auto dup = std::find_if(keep.begin(), keep.end(), [&](std::size_t k) { return same(k, c); });
    if (dup != keep.end()) {
      result.log.push_back("dropped column '" + name + "' (duplicate of '" + table.columns[*dup] + "')");
      continue;
    }
    keep.push_back(c);
  }
  std::sort(keep.begin(), keep.end());
  for (auto c : keep) result.table.columns.push_back(table.columns[c]);
  result.table.rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<std::string> r;
    r.reserve(keep.size());
    for (auto c : keep) r.push_back(row[c]);
    result.table.rows.push_back(std::move(r));
  }
  return result;
}

// ---------------------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::TooFewValues, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IqrResult iqr_filter(std::span<const double> values, double multiplier) {
  if (!(multiplier > 0)) throw Error(ErrorCode::InvalidConfig, "IQR multiplier must be > 0");
  if (values.size() < 4)
    throw Error(ErrorCode::TooFewValues, "IQR filtering needs at least 4 values, got " +
                                             std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "IQR input contains " + detail::format_number(v));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  IqrResult r;
  r.q1 = quantile_sorted(sorted, 0.25);
  r.q3 = quantile_sorted(sorted, 0.75);
  const double iqr = r.q3 - r.q1;
  r.lower_fence = r.q1 - multiplier * iqr;
  r.upper_fence = r.q3 + multiplier * iqr;

  double sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < r.lower_fence || values[i] > r.upper_fence) {
      r.outlier_indices.push_back(i);
    } else {
      sum += values[i];
      ++kept;
    }
  }
  if (kept == 0) throw Error(ErrorCode::AllOutliers, "IQR fences exclude every value");
  r.replacement = sum / static_cast<double>(kept);
  r.cleaned.assign(values.begin(), values.end());
  for (auto i : r.outlier_indices) r.cleaned[i] = r.replacement;
  return r;
}

ImputeResult impute(const Table& table, const IngestConfig& cfg) {
  ImputeResult result{table, {}, {}};
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const auto& name = table.columns[c];
    const ColumnType type = type_of(cfg, name);
    if (type == ColumnType::Text) continue;
    std::size_t missing = 0;
    for (const auto& row : table.rows)
      if (detail::trim(row[c]).empty()) ++missing;
    if (missing == 0) continue;
    if (type == ColumnType::Boolean) {
      result.flagged.push_back(name);
      result.log.push_back("column '" + name + "': " + std::to_string(missing) +
                           " missing boolean cells left absent");
      continue;
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : table.rows)
      if (auto v = parse_number(row[c])) {
        sum += *v;
        ++n;
      }
    if (n == 0) throw Error(ErrorCode::ColumnAllMissing, "column '" + name + "' has no values");
    double fill = sum / static_cast<double>(n);
    if (type == ColumnType::Integer) fill = std::round(fill);
    const std::string text = detail::format_number(fill);
    for (auto& row : result.table.rows)
      if (detail::trim(row[c]).empty()) row[c] = text;
    result.log.push_back("column '" + name + "': filled " + std::to_string(missing) +
                         " cells with mean " + text);
  }
  return result;
}

LabeledSplit label_and_split(const std::vector<RescueRecord>& records) {
  LabeledSplit s;
  for (const auto& r : records) {
    switch (r.label) {
      case Label::Psychiatric: s.psychiatric.push_back(r); break;
      case Label::NonPsychiatric: s.non_psychiatric.push_back(r); break;
      case Label::Unknown: ++s.excluded_unknown; break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

IngestResult run_ingest(const std::vector<Table>& tables, const IngestConfig& cfg) {
  cfg.validate();
  IngestResult result;
  auto& log = result.log;

  Table merged = merge_cases(tables, cfg);
  log.push_back("merged " + std::to_string(tables.size()) + " tables into " +
                std::to_string(merged.rows.size()) + " cases");
  auto reduced = reduce_columns(merged, cfg);
  log.insert(log.end(), reduced.log.begin(), reduced.log.end());
  Table t = std::move(reduced.table);

  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const auto& name = t.columns[c];
    const ColumnType type = type_of(cfg, name);
    const bool no_negatives = contains(cfg.negative_forbidden_columns, name);
    std::size_t cleared = 0, unparsable = 0;
    for (auto& row : t.rows) {
      auto& cell = row[c];
      if (type == ColumnType::Text) {
        std::string s = strip_marks(cell);
        for (const auto& [from, to] : cfg.text_aliases) s = replace_word_ci(s, from, to);
        cell = std::move(s);
        continue;
      }
      // merged multi-reading cells keep the first reading
      if (auto pos = cell.find(','); pos != std::string::npos) cell = cell.substr(0, pos);
      cell = detail::trim(cell);
      if (cell.empty() || type == ColumnType::Boolean) continue;
      auto v = parse_number(cell);
      if (!v) {
        cell.clear();
        ++unparsable;
      } else if (no_negatives && *v < 0) {
        cell.clear();
        ++cleared;
      }
    }
    if (cleared)
      log.push_back("column '" + name + "': cleared " + std::to_string(cleared) + " negative values");
    if (unparsable)
      log.push_back("column '" + name + "': cleared " + std::to_string(unparsable) + " non-numeric values");
  }

  for (const auto& name : cfg.iqr_columns) {
    const auto c = t.index_of(name);
    if (!c) continue;
    std::vector<double> values;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (auto v = parse_number(t.rows[r][*c])) {
        values.push_back(*v);
        rows.push_back(r);
      }
    if (values.size() < 4) {
      log.push_back("column '" + name + "': IQR skipped (" + std::to_string(values.size()) + " values)");
      continue;
    }
    const auto iqr = iqr_filter(values, cfg.iqr_multiplier);
    for (auto i : iqr.outlier_indices) t.rows[rows[i]][*c] = detail::format_number(iqr.replacement);
    log.push_back("column '" + name + "': IQR fences [" + detail::format_number(iqr.lower_fence) + ", " +
                  detail::format_number(iqr.upper_fence) + "], replaced " +
                  std::to_string(iqr.outlier_indices.size()) + " outliers with " +
                  detail::format_number(iqr.replacement));
  }

  auto imputed = impute(t, cfg);
  log.insert(log.end(), imputed.log.begin(), imputed.log.end());
  t = std::move(imputed.table);

  RecordSchema schema = cfg.schema;
  schema.case_id = cfg.key_column;
  for (const auto& row : t.rows) {
    RawFields raw;
    for (std::size_t c = 0; c < t.columns.size(); ++c) raw[t.columns[c]] = row[c];
    auto v = validate_record(raw, schema);
    if (v.ok()) {
      result.records.push_back(std::move(*v.record));
    } else {
      result.rejected.push_back({raw[cfg.key_column], std::move(v.errors)});
    }
  }
  log.push_back("validated " + std::to_string(result.records.size()) + " records, rejected " +
                std::to_string(result.rejected.size()));
  return result;
}

}  // namespace psytriage
