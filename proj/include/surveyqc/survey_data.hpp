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

// Survey ingestion: schema inference, numeric discretization and one-hot
// encoding into per-variable feature blocks.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "surveyqc/common.hpp"
#include "surveyqc/csv.hpp"

namespace surveyqc {

enum class VariableKind { categorical, numeric };

inline std::string to_string(VariableKind kind) {
  return kind == VariableKind::numeric ? "numeric" : "categorical";
}

inline constexpr std::string_view kMissingLabel = "Missing";

// Standardized-value bins for numeric variables, in ascending order.
inline constexpr std::array<std::string_view, 5> kNumericBins = {
    "Bottom-extreme", "Low", "Normal", "High", "Top-extreme"};

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::categorical;
  // Observed labels (categorical) or the five z-bins (numeric). The Missing
  // feature is never listed here; it is appended when has_missing is set.
  std::vector<std::string> categories;
  bool has_missing = false;
  // z-scoring statistics, meaningful for numeric variables only.
  double mean = 0.0;
  double stddev = 0.0;

  std::size_t block_size() const { return categories.size() + (has_missing ? 1 : 0); }

  // Label of feature `k` within this variable's block.
  std::string feature_label(std::size_t k) const {
    return k < categories.size() ? categories[k] : std::string(kMissingLabel);
  }
};

struct SurveySchema {
  std::vector<VariableSpec> variables;

  std::size_t num_features() const {
    std::size_t d = 0;
    for (const auto& v : variables) d += v.block_size();
    return d;
  }

  const VariableSpec* find(std::string_view name) const {
    for (const auto& v : variables)
      if (v.name == name) return &v;
    return nullptr;
  }

  // Stable identity of the layout; models record it so a model can refuse a
  // schema it was not fitted against.
  std::string fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (const auto& v : variables) {
      mix(v.name);
      mix(to_string(v.kind));
      for (const auto& c : v.categories) mix(c);
      mix(v.has_missing ? "1" : "0");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

// Contiguous feature range [begin, end) of one variable.
struct Block {
  std::size_t variable = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Block&) const = default;
};

// Row-per-respondent one-hot matrix. Every row has exactly one set bit per
// block.
struct EncodedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;  // row-major rows x cols
  std::vector<Block> blocks;
  std::vector<std::string> respondent_ids;

  std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * cols + c]; }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return {bits.data() + r * cols, cols};
  }
};

// Integer category index per (respondent, variable); Missing is the last
// index of a variable that has one.
struct CategoricalMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> values;        // row-major rows x cols
  std::vector<int> cardinality;   // K_v per column

  int at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const int> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct IngestOptions {
  std::size_t distinct_threshold = 20;
  std::vector<std::string> missing_markers = {"", "NA", "N/A"};
  // Columns never treated as survey variables (respondent ids, attention
  // checks).
  std::vector<std::string> excluded_columns;
  // Respondent id column. When it is absent from the table (or empty), ids
  // are 1-based row numbers unless `require_id_column` is set.
  std::string id_column = "respondent_id";
  bool require_id_column = false;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

inline std::optional<double> parse_number(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace detail

inline bool is_missing(std::string_view cell, const std::vector<std::string>& markers) {
  std::string t = detail::trim(cell);
  for (const auto& m : markers)
    if (detail::iequals(t, m)) return true;
  return false;
}

// Maps a standardized value onto its bin index in kNumericBins.
inline std::size_t discretize_index(double z) {
  if (!std::isfinite(z)) throw numeric_error("cannot discretize non-finite z-score");
  if (z < -1.4) return 0;
  if (z < -0.7) return 1;
  if (z <= 0.7) return 2;
  if (z <= 1.4) return 3;
  return 4;
}

// Bin label for a standardized value; nullopt means the value is missing.
inline std::string discretize(std::optional<double> z) {
  if (!z) return std::string(kMissingLabel);
  return std::string(kNumericBins[discretize_index(*z)]);
}

inline double standardize(double x, const VariableSpec& spec) {
  if (spec.stddev <= 0.0) return 0.0;
  return (x - spec.mean) / spec.stddev;
}

// Respondent ids for a table: the id column when configured, else row numbers.
inline std::vector<std::string> respondent_ids(const RawTable& table, const IngestOptions& opts) {
  std::vector<std::string> ids;
  ids.reserve(table.num_rows());
  std::size_t col = RawTable::npos;
  if (!opts.id_column.empty()) {
    col = table.column_index(opts.id_column);
    if (col == RawTable::npos && opts.require_id_column)
      throw config_error("id column '" + opts.id_column + "' not found");
  }
  for (std::size_t r = 0; r < table.num_rows(); ++r)
    ids.push_back(col == RawTable::npos ? std::to_string(r + 1) : table.rows[r][col]);
  return ids;
}

// Infers variable kinds and category vocabularies from a raw table.
//
// A column is numeric when every non-missing cell parses as a number and it
// has at least `distinct_threshold` distinct values; everything else is
// categorical with first-appearance category order. Columns with no
// non-missing values, and columns that would encode to a single feature, are
// dropped with a warning.
inline SurveySchema infer_schema(const RawTable& table, const IngestOptions& opts = {}) {
  if (table.num_rows() == 0 || table.num_columns() == 0)
    throw data_error("cannot infer a schema from an empty table");
  if (opts.distinct_threshold == 0) throw config_error("distinct_threshold must be positive");

  std::set<std::string> excluded(opts.excluded_columns.begin(), opts.excluded_columns.end());
  if (!opts.id_column.empty()) excluded.insert(opts.id_column);
  std::set<std::string> seen_names;

  SurveySchema schema;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const std::string& name = table.columns[c];
    if (excluded.count(name)) continue;
    if (!seen_names.insert(name).second) throw data_error("duplicate column name '" + name + "'");

    VariableSpec spec;
    spec.name = name;
    std::vector<std::string> order;
    std::unordered_set<std::string> distinct;
    std::vector<double> numbers;
    bool all_numeric = true;
    for (const auto& row : table.rows) {
      const std::string& cell = row[c];
      if (is_missing(cell, opts.missing_markers)) {
        spec.has_missing = true;
        continue;
      }
      std::string value = detail::trim(cell);
      if (distinct.insert(value).second) order.push_back(value);
      if (all_numeric) {
        if (auto x = detail::parse_number(value)) numbers.push_back(*x);
        else all_numeric = false;
      }
    }
    if (order.empty()) {
      warn("column '" + name + "' has no non-missing values; dropped");
      continue;
    }

    std::set<double> numeric_distinct(numbers.begin(), numbers.end());
    if (all_numeric && numeric_distinct.size() >= opts.distinct_threshold) {
      spec.kind = VariableKind::numeric;
      double sum = 0.0;
      for (double x : numbers) sum += x;
      spec.mean = sum / static_cast<double>(numbers.size());
      double ss = 0.0;
      for (double x : numbers) ss += (x - spec.mean) * (x - spec.mean);
      spec.stddev = std::sqrt(ss / static_cast<double>(numbers.size()));
      spec.categories.assign(kNumericBins.begin(), kNumericBins.end());
      spec.has_missing = true;  // numeric blocks always carry the Missing bin
    } else {
      spec.categories = std::move(order);
    }
    if (spec.block_size() < 2) {
      warn("column '" + name + "' is constant with no missing values; dropped");
      continue;
    }
    schema.variables.push_back(std::move(spec));
  }
  if (schema.variables.empty()) throw data_error("no usable survey variables in table");
  return schema;
}

// One-hot encodes `table` against `schema`.
//
// Numeric cells are z-scored with the schema's stored statistics and binned.
// A value outside the vocabulary maps to Missing when the variable has a
// Missing feature, and is an error otherwise.
inline EncodedMatrix encode(const RawTable& table, const SurveySchema& schema,
                            const IngestOptions& opts = {}) {
  std::vector<std::size_t> source;
  for (const auto& v : schema.variables) {
    std::size_t c = table.column_index(v.name);
    if (c == RawTable::npos) throw data_error("table has no column '" + v.name + "'");
    source.push_back(c);
  }

  EncodedMatrix m;
  m.rows = table.num_rows();
  m.cols = schema.num_features();
  m.bits.assign(m.rows * m.cols, 0);
  m.respondent_ids = respondent_ids(table, opts);
  std::size_t offset = 0;
  for (std::size_t v = 0; v < schema.variables.size(); ++v) {
    std::size_t size = schema.variables[v].block_size();
    m.blocks.push_back({v, offset, offset + size});
    offset += size;
  }

  for (std::size_t v = 0; v < schema.variables.size(); ++v) {
    const VariableSpec& spec = schema.variables[v];
    const Block& block = m.blocks[v];
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t k = 0; k < spec.categories.size(); ++k) lookup.emplace(spec.categories[k], k);

    for (std::size_t r = 0; r < m.rows; ++r) {
      const auto& row = table.rows[r];
      if (row.size() != table.num_columns())
        throw data_error("row " + std::to_string(r + 1) + " arity does not match header");
      const std::string& cell = row[source[v]];
      std::optional<std::size_t> k;
      if (!is_missing(cell, opts.missing_markers)) {
        if (spec.kind == VariableKind::numeric) {
          if (auto x = detail::parse_number(cell)) k = discretize_index(standardize(*x, spec));
        } else if (auto it = lookup.find(detail::trim(cell)); it != lookup.end()) {
          k = it->second;
        }
        if (!k && !spec.has_missing)
          throw data_error("value '" + cell + "' of variable '" + spec.name +
                           "' is not in the schema and the variable has no Missing category");
      } else if (!spec.has_missing) {
        throw data_error("missing value in variable '" + spec.name +
                         "' which has no Missing category");
      }
      std::size_t feature = k ? *k : spec.categories.size();
      m.bits[r * m.cols + block.begin + feature] = 1;
    }
  }
  return m;
}

inline CategoricalMatrix categorical_view(const EncodedMatrix& m) {
  CategoricalMatrix out;
  out.rows = m.rows;
  out.cols = m.blocks.size();
  out.values.resize(out.rows * out.cols);
  for (const auto& b : m.blocks) out.cardinality.push_back(static_cast<int>(b.size()));
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto bits = m.row(r);
    for (std::size_t v = 0; v < m.blocks.size(); ++v) {
      const Block& b = m.blocks[v];
      auto first = bits.begin() + static_cast<std::ptrdiff_t>(b.begin);
      auto last = bits.begin() + static_cast<std::ptrdiff_t>(b.end);
      out.values[r * out.cols + v] = static_cast<int>(std::find(first, last, 1) - first);
    }
  }
  return out;
}

// Inverse of categorical_view given the block layout.
inline EncodedMatrix one_hot(const CategoricalMatrix& cats, std::vector<Block> blocks,
                             std::vector<std::string> ids = {}) {
  EncodedMatrix m;
  m.rows = cats.rows;
  m.cols = blocks.empty() ? 0 : blocks.back().end;
  m.blocks = std::move(blocks);
  m.bits.assign(m.rows * m.cols, 0);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t v = 0; v < m.blocks.size(); ++v) {
      int k = cats.at(r, v);
      if (k < 0 || static_cast<std::size_t>(k) >= m.blocks[v].size())
        throw data_error("category index out of range");
      m.bits[r * m.cols + m.blocks[v].begin + static_cast<std::size_t>(k)] = 1;
    }
  if (ids.empty())
    for (std::size_t r = 0; r < m.rows; ++r) ids.push_back(std::to_string(r + 1));
  m.respondent_ids = std::move(ids);
  return m;
}

// Contiguous blocks for the given per-variable cardinalities.
inline std::vector<Block> blocks_for(std::span<const int> cardinality) {
  std::vector<Block> blocks;
  std::size_t offset = 0;
  for (std::size_t v = 0; v < cardinality.size(); ++v) {
    blocks.push_back({v, offset, offset + static_cast<std::size_t>(cardinality[v])});
    offset += static_cast<std::size_t>(cardinality[v]);
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json to_json(const SurveySchema& schema) {
  nlohmann::ordered_json vars = nlohmann::ordered_json::array();
  for (const auto& v : schema.variables) {
    nlohmann::ordered_json j;
    j["name"] = v.name;
    j["kind"] = to_string(v.kind);
    j["categories"] = v.categories;
    j["has_missing"] = v.has_missing;
    j["mean"] = v.mean;
    j["std"] = v.stddev;
    vars.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["format"] = "surveyqc.schema";
  doc["version"] = 1;
  doc["variables"] = std::move(vars);
  return doc;
}

inline SurveySchema schema_from_json(const nlohmann::json& doc) {
  SurveySchema schema;
  try {
    std::set<std::string> names;
    for (const auto& j : doc.at("variables")) {
      VariableSpec v;
      v.name = j.at("name").get<std::string>();
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "numeric") v.kind = VariableKind::numeric;
      else if (kind == "categorical") v.kind = VariableKind::categorical;
      else throw data_error("unknown variable kind '" + kind + "'");
      v.categories = j.at("categories").get<std::vector<std::string>>();
      v.has_missing = j.at("has_missing").get<bool>();
      v.mean = j.value("mean", 0.0);
      v.stddev = j.value("std", 0.0);
      if (!names.insert(v.name).second) throw data_error("duplicate variable '" + v.name + "'");
      std::set<std::string> cats(v.categories.begin(), v.categories.end());
      if (cats.size() != v.categories.size()) throw data_error("duplicate category in '" + v.name + "'");
      if (v.block_size() < 2) throw data_error("variable '" + v.name + "' has fewer than two features");
      schema.variables.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed schema JSON: ") + e.what());
  }
  return schema;
}

// Debug export: 0/1 cells under "variable=category" headers.
inline std::string encoded_csv(const EncodedMatrix& m, const SurveySchema& schema) {
  std::vector<std::string> header{"respondent_id"};
  for (const auto& b : m.blocks) {
    const VariableSpec& v = schema.variables[b.variable];
    for (std::size_t k = 0; k < b.size(); ++k) header.push_back(v.name + "=" + v.feature_label(k));
  }
  std::string out = csv::join(header) + "\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    out += csv::escape(m.respondent_ids[r]);
    for (std::size_t c = 0; c < m.cols; ++c) {
      out.push_back(',');
      out.push_back(m.at(r, c) ? '1' : '0');
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace surveyqc
