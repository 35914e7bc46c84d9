#include "psytriage/table.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "psytriage/error.hpp"

namespace psytriage {

std::optional<std::size_t> Table::index_of(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

namespace {

// Returns false at end of input with no record read.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::Parse, "unterminated quoted CSV field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

bool needs_quotes(const std::string& s, char delim) {
  return s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
}

}  // namespace

Table read_csv(std::istream& in, char delimiter) {
  Table t;
  std::vector<std::string> fields;
  if (!read_record(in, delimiter, fields)) return t;
  if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
  t.columns = fields;
  while (read_record(in, delimiter, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() > t.columns.size())
      throw Error(ErrorCode::Parse, "CSV row " + std::to_string(t.rows.size() + 2) + " has " +
                                        std::to_string(fields.size()) + " fields, header has " +
                                        std::to_string(t.columns.size()));
    fields.resize(t.columns.size());
    t.rows.push_back(fields);
  }
  return t;
}

Table read_csv_file(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_csv(in, delimiter);
}

void write_csv(std::ostream& out, const Table& t, char delimiter) {
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << delimiter;
      const auto& s = row[i];
      if (needs_quotes(s, delimiter)) {
        out << '"';
        for (char c : s) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << s;
      }
    }
    out << '\n';
  };
  emit(t.columns);
  for (const auto& r : t.rows) emit(r);
}

void write_csv_file(const std::filesystem::path& path, const Table& t, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_csv(out, t, delimiter);
}

}  // namespace psytriage
