#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace workbench::csv {

struct Location {
  std::string file;
  std::size_t row = 0;     // 1-based physical line; header is row 1
  std::string column;      // empty when the error concerns the whole row
};

class ParseError : public std::runtime_error {
 public:
  ParseError(Location where, const std::string& detail);

  const Location& where() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Location where_;
  std::string detail_;
};

struct Record {
  std::size_t row = 0;
  std::vector<std::string> cells;
};

// RFC 4180 reader. Accepts LF or CRLF, a leading UTF-8 BOM, quoted cells with
// doubled quotes, and skips blank lines. Unquoted cells are trimmed.
std::vector<Record> read(std::string_view text, const std::string& file = {});

// Reads and checks the header row against `expected` exactly. Returns the data
// rows, each guaranteed to have expected.size() cells.
std::vector<Record> read_table(std::string_view text, const std::vector<std::string>& expected,
                               const std::string& file = {});

std::string quote(std::string_view cell);
std::string write_row(const std::vector<std::string>& cells);

std::vector<std::string> split_list(std::string_view cell, char sep = '|');
std::string join_list(const std::vector<std::string>& items, char sep = '|');

}  // namespace workbench::csv
