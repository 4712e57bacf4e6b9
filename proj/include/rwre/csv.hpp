#pragma once

// Minimal RFC 4180 CSV: fixed header, doubles at 17 significant digits,
// LF line endings, fields quoted only when they contain , " or newlines.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rwre/error.hpp"

namespace rwre {

using CsvCell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string format_cell(const CsvCell& c) {
  struct {
    std::string operator()(double x) const { return format_double(x); }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(std::uint64_t x) const { return std::to_string(x); }
    std::string operator()(const std::string& s) const { return csv_escape(s); }
  } visitor;
  return std::visit(visitor, c);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  explicit CsvTable(std::vector<std::string> h = {}) : header(std::move(h)) {}

  void add(std::vector<CsvCell> row) {
    if (row.size() != header.size()) throw InvalidArgument("csv: row width does not match header");
    rows.push_back(std::move(row));
  }

  std::string to_string() const {
    std::string out;
    auto line = [&](const auto& cells, auto&& fmt) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += fmt(cells[i]);
      }
      out += '\n';
    };
    line(header, [](const std::string& s) { return csv_escape(s); });
    for (const auto& r : rows) line(r, [](const CsvCell& c) { return format_cell(c); });
    return out;
  }
};

/// Write `table` to `path`; the file holds only the header when there are no rows.
inline void emit_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << table.to_string();
  if (!out) throw Error("write failed for " + path);
}

/// Parse CSV text into rows of fields (header included as the first row).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) throw InvalidArgument("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace rwre
