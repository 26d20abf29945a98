#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tmaxbayes::csv {

/// Splits one comma-separated record. Double-quoted fields may contain commas;
/// surrounding whitespace is trimmed from unquoted fields.
std::vector<std::string> split_record(std::string_view line);

/// Parsed file: header plus data rows. Blank lines are skipped; a UTF-8 BOM is
/// stripped. Row numbers in `line_numbers` are 1-based physical lines.
struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  /// Index of a header column, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

Document read(std::istream& in);
Document read_file(const std::filesystem::path& path);

/// Strict double parse of a whole field; empty or trailing garbage -> nullopt.
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_integer(std::string_view field);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);

}  // namespace tmaxbayes::csv
