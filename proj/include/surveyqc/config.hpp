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

// Reader for the flat, sectioned key/value run configuration:
//
//   [section]
//   key = "string" | 1.5 | true | [1, 2, "x"]   # comment
//
// Keys are addressed as "section.key". Only this subset is accepted.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "surveyqc/common.hpp"
#include "surveyqc/survey_data.hpp"

namespace surveyqc {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = detail::trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw config_error(where(lineno) + "unterminated section header");
        section = detail::trim(t.substr(1, t.size() - 2));
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos) throw config_error(where(lineno) + "expected 'key = value'");
      std::string key = detail::trim(t.substr(0, eq));
      if (key.empty()) throw config_error(where(lineno) + "empty key");
      std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) throw config_error(where(lineno) + "duplicate key '" + full + "'");
      cfg.values_[full] = parse_value(detail::trim(t.substr(eq + 1)), lineno);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get_string(const std::string& key) const {
    auto v = find(key);
    if (!v) return std::nullopt;
    if (v->size() != 1) throw config_error("'" + key + "' must be a scalar");
    return v->front();
  }

  std::optional<double> get_double(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    auto x = detail::parse_number(*s);
    if (!x) throw config_error("'" + key + "' must be a number");
    return *x;
  }

  std::optional<std::int64_t> get_int(const std::string& key) const {
    auto x = get_double(key);
    if (!x) return std::nullopt;
    if (*x != std::floor(*x)) throw config_error("'" + key + "' must be an integer");
    return static_cast<std::int64_t>(*x);
  }

  std::optional<bool> get_bool(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    if (*s == "true") return true;
    if (*s == "false") return false;
    throw config_error("'" + key + "' must be true or false");
  }

  std::optional<std::vector<std::string>> get_list(const std::string& key) const {
    auto v = find(key);
    if (!v) return std::nullopt;
    return *v;
  }

  std::optional<std::vector<double>> get_number_list(const std::string& key) const {
    auto v = get_list(key);
    if (!v) return std::nullopt;
    std::vector<double> out;
    for (const auto& s : *v) {
      auto x = detail::parse_number(s);
      if (!x) throw config_error("'" + key + "' must contain numbers only");
      out.push_back(*x);
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [key, _] : values_) k.push_back(key);
    return k;
  }

 private:
  static std::string where(int lineno) { return "config line " + std::to_string(lineno) + ": "; }

  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  static std::string parse_scalar(const std::string& raw, int lineno) {
    std::string t = detail::trim(raw);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
    if (t.empty()) throw config_error(where(lineno) + "empty value");
    if (t.front() == '"') throw config_error(where(lineno) + "unterminated string");
    return t;
  }

  static std::vector<std::string> parse_value(const std::string& raw, int lineno) {
    if (raw.empty()) throw config_error(where(lineno) + "missing value");
    if (raw.front() != '[') return {parse_scalar(raw, lineno)};
    if (raw.back() != ']') throw config_error(where(lineno) + "unterminated list");
    std::vector<std::string> items;
    std::string body = raw.substr(1, raw.size() - 2);
    std::string cur;
    bool quoted = false;
    for (char c : body) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        items.push_back(parse_scalar(cur, lineno));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!detail::trim(cur).empty()) items.push_back(parse_scalar(cur, lineno));
    return items;
  }

  const std::vector<std::string>* find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  std::map<std::string, std::vector<std::string>> values_;
};

}  // namespace surveyqc
