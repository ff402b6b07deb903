#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace synthctl {

struct CsvRow {
  std::size_t line_no = 0;  // 1-based, header is line 1
  std::vector<std::string> fields;
};

// Minimal comma-separated reader: UTF-8 pass-through, CRLF tolerated,
// no quoting (the panel formats never need it). Blank lines are skipped.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(CsvRow& row);

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

// strict scalar parsing; returns nullopt on any trailing garbage
std::optional<double> parse_double(const std::string& text);
std::optional<long long> parse_int(const std::string& text);

}  // namespace synthctl
