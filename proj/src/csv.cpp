#include "workbench/csv.hpp"

namespace workbench::csv {

namespace {

std::string format_message(const Location& where, const std::string& detail) {
  std::string msg = where.file.empty() ? std::string("<input>") : where.file;
  if (where.row > 0) {
    msg += ":" + std::to_string(where.row);
  }
  if (!where.column.empty()) {
    msg += " [" + where.column + "]";
  }
  return msg + ": " + detail;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) {
    return {};
  }
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

ParseError::ParseError(Location where, const std::string& detail)
    : std::runtime_error(format_message(where, detail)), where_(std::move(where)), detail_(detail) {}

std::vector<Record> read(std::string_view text, const std::string& file) {
  if (text.starts_with("\xEF\xBB\xBF")) {
    text.remove_prefix(3);
  }

  std::vector<Record> records;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  while (i < n) {
    Record rec;
    rec.row = line;
    bool row_has_content = false;

    // One record.
    while (true) {
      std::string cell;
      // Leading whitespace before an opening quote is tolerated.
      std::size_t probe = i;
      while (probe < n && (text[probe] == ' ' || text[probe] == '\t')) ++probe;
      if (probe < n && text[probe] == '"') {
        i = probe + 1;
        const std::size_t open_line = line;
        while (true) {
          if (i >= n) {
            throw ParseError({file, open_line, {}}, "unterminated quoted cell");
          }
          char c = text[i];
          if (c == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              cell.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (c == '\n') ++line;
          cell.push_back(c);
          ++i;
        }
        while (i < n && (text[i] == ' ' || text[i] == '\t')) ++i;
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw ParseError({file, line, {}}, "unexpected character after closing quote");
        }
        row_has_content = true;
      } else {
        std::size_t start = i;
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') {
            throw ParseError({file, line, {}}, "stray quote inside unquoted cell");
          }
          ++i;
        }
        auto raw = trim(text.substr(start, i - start));
        if (!raw.empty()) row_has_content = true;
        cell.assign(raw);
      }
      rec.cells.push_back(std::move(cell));

      if (i < n && text[i] == ',') {
        row_has_content = true;
        ++i;
        continue;
      }
      break;
    }

    // End of record.
    if (i < n && text[i] == '\r') {
      ++i;
      if (i < n && text[i] != '\n') {
        throw ParseError({file, line, {}}, "bare carriage return");
      }
    }
    if (i < n && text[i] == '\n') {
      ++i;
    }
    ++line;

    if (row_has_content) {
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<Record> read_table(std::string_view text, const std::vector<std::string>& expected,
                               const std::string& file) {
  auto records = read(text, file);
  if (records.empty()) {
    throw ParseError({file, 1, {}}, "missing header row");
  }
  const auto& header = records.front();
  if (header.cells != expected) {
    for (std::size_t c = 0; c < expected.size(); ++c) {
      if (c >= header.cells.size()) {
        throw ParseError({file, header.row, expected[c]}, "missing column '" + expected[c] + "'");
      }
      if (header.cells[c] != expected[c]) {
        throw ParseError({file, header.row, expected[c]},
                         "expected column '" + expected[c] + "', found '" + header.cells[c] + "'");
      }
    }
    throw ParseError({file, header.row, {}}, "unexpected extra header columns");
  }
  records.erase(records.begin());
  for (const auto& r : records) {
    if (r.cells.size() != expected.size()) {
      throw ParseError({file, r.row, {}}, "expected " + std::to_string(expected.size()) +
                                              " cells, found " + std::to_string(r.cells.size()));
    }
  }
  return records;
}

std::string quote(std::string_view cell) {
  bool needs = cell.find_first_of(",\"\r\n") != std::string_view::npos ||
               (!cell.empty() && (cell.front() == ' ' || cell.back() == ' '));
  if (!needs) {
    return std::string(cell);
  }
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string write_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out.push_back(',');
    out += quote(cells[i]);
  }
  out.push_back('\n');
  return out;
}

std::vector<std::string> split_list(std::string_view cell, char sep) {
  std::vector<std::string> out;
  if (trim(cell).empty()) {
    return out;
  }
  std::size_t start = 0;
  while (true) {
    auto pos = cell.find(sep, start);
    auto piece = trim(cell.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += items[i];
  }
  return out;
}

}  // namespace workbench::csv
