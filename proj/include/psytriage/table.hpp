#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psytriage {

/// Rectangular string table with a header row. Empty cells are missing values.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t width() const { return columns.size(); }

  friend bool operator==(const Table&, const Table&) = default;
};

/// RFC 4180-style reader: quoted fields, doubled quotes, embedded newlines,
/// optional UTF-8 BOM. Short rows are padded with empty cells.
Table read_csv(std::istream& in, char delimiter = ',');
Table read_csv_file(const std::filesystem::path& path, char delimiter = ',');

void write_csv(std::ostream& out, const Table& t, char delimiter = ',');
void write_csv_file(const std::filesystem::path& path, const Table& t, char delimiter = ',');

}  // namespace psytriage
