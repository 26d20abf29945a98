#include "tmaxbayes/csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <system_error>

#include "tmaxbayes/errors.hpp"

namespace tmaxbayes::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.emplace_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

std::optional<std::size_t> Document::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

Document read(std::istream& in) {
  Document doc;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_record(line);
    if (!have_header) {
      doc.header = std::move(fields);
      have_header = true;
    } else {
      doc.rows.push_back(std::move(fields));
      doc.line_numbers.push_back(line_no);
    }
  }
  if (!have_header) throw IngestError("CSV input has no header row");
  return doc;
}

Document read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  return read(in);
}

std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::optional<long long> parse_integer(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

}  // namespace tmaxbayes::csv
