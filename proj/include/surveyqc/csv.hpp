// Copyright 2026 The SurveyQC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "surveyqc/common.hpp"

namespace surveyqc {

// Header plus rows of raw cell text. Missing values stay as their raw
// marker (usually the empty string); interpretation happens downstream.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_columns() const { return columns.size(); }

  // Index of a named column, or npos.
  std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    return npos;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

namespace csv {

// Splits one logical CSV record (RFC 4180 quoting) starting at `pos`.
// Advances `pos` past the record terminator.
inline std::vector<std::string> next_record(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"') {
      quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\r' || c == '\n') {
      ++pos;
      if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      break;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  if (quoted) throw data_error("unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return fields;
}

inline RawTable parse(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  RawTable table;
  std::size_t pos = 0;
  if (text.empty()) throw data_error("CSV input is empty");
  table.columns = next_record(text, pos);
  std::size_t line = 1;
  while (pos < text.size()) {
    ++line;
    auto record = next_record(text, pos);
    if (record.size() == 1 && record[0].empty()) continue;  // blank line
    if (record.size() != table.columns.size()) {
      throw data_error("CSV line " + std::to_string(line) + " has " +
                       std::to_string(record.size()) + " fields, header has " +
                       std::to_string(table.columns.size()));
    }
    table.rows.push_back(std::move(record));
  }
  return table;
}

inline RawTable read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open input file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

inline std::string format(const RawTable& table) {
  std::string out = join(table.columns) + "\n";
  for (const auto& row : table.rows) out += join(row) + "\n";
  return out;
}

// Fixed-point formatting used by every CSV report.
inline std::string fixed(double value, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

// Round-trippable representation of a double.
inline std::string exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace csv
}  // namespace surveyqc
