#pragma once

// Minimal RFC 4180 comma-separated text: quoted fields, doubled quotes,
// embedded newlines. Output always uses "\n" line endings.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "p910/error.hpp"

namespace p910::csv {

using Row = std::vector<std::string>;

inline std::string escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string format_row(const Row& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) line += ',';
    line += escape(row[i]);
  }
  line += '\n';
  return line;
}

/// Shortest decimal that round-trips, with a fixed format so reruns are byte-identical.
inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Fixed-decimals rendering for human-facing tables.
inline std::string fixed(double v, int decimals = 4) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw Error(ErrorCode::MalformedInput, "quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        field_started = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::MalformedInput, "unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Parsed table addressed by header name.
class Table {
 public:
  explicit Table(std::string_view text) {
    auto rows = parse(text);
    if (rows.empty()) throw Error(ErrorCode::MalformedInput, "missing header row");
    header_ = std::move(rows.front());
    for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() == 1 && rows[r][0].empty()) continue;
      if (rows[r].size() != header_.size()) {
        throw Error(ErrorCode::MalformedInput, "row " + std::to_string(r) + " has " +
                                                   std::to_string(rows[r].size()) + " fields, expected " +
                                                   std::to_string(header_.size()));
      }
      rows_.push_back(std::move(rows[r]));
    }
  }

  bool has(const std::string& column) const { return index_.count(column) > 0; }
  std::size_t size() const { return rows_.size(); }
  const Row& header() const { return header_; }

  const std::string& at(std::size_t row, const std::string& column) const {
    auto it = index_.find(column);
    if (it == index_.end()) throw Error(ErrorCode::MalformedInput, "missing column " + column);
    return rows_.at(row)[it->second];
  }

  double number_at(std::size_t row, const std::string& column) const {
    const std::string& s = at(row, column);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw Error(ErrorCode::MalformedInput, "not a number in column " + column + ": '" + s + "'");
    }
    return v;
  }

 private:
  Row header_;
  std::map<std::string, std::size_t> index_;
  std::vector<Row> rows_;
};

}  // namespace p910::csv
