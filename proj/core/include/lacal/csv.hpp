#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lacal::csv {

/// Comma-separated table with a header row. Lines starting with '#' before
/// the header are kept as comments (artifact metadata).
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index; throws an io error naming the missing column.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

Table read(const std::filesystem::path& path);
Table parse(const std::string& text);

/// Shortest round-trip decimal form of a double.
std::string format(double value);

/// Writes comments, header and rows; fields are written as given.
void write(const std::filesystem::path& path, const Table& table);

}  // namespace lacal::csv
