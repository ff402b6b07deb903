#include "csv.hpp"

#include <charconv>
#include <cstdlib>

namespace synthctl {

bool CsvReader::next(CsvRow& row) {
  std::string line;
  for (;;) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) break;
  }
  row.line_no = line_no_;
  row.fields.clear();
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      row.fields.push_back(line.substr(start));
      break;
    }
    row.fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return true;
}

namespace {

std::string trimmed(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = text.find_last_not_of(" \t");
  return text.substr(b, e - b + 1);
}

}  // namespace

std::optional<double> parse_double(const std::string& text) {
  std::string t = trimmed(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(const std::string& text) {
  std::string t = trimmed(text);
  if (t.empty()) return std::nullopt;
  long long value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

}  // namespace synthctl
