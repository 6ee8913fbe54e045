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

// Synthetic surveys with planted tree structure and uniformly random
// (inattentive) respondents.

#pragma once

#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "surveyqc/common.hpp"
#include "surveyqc/csv.hpp"
#include "surveyqc/random.hpp"

namespace surveyqc::synth {

inline constexpr const char* kIdColumn = "respondent_id";
inline constexpr const char* kCheckColumn = "attention_check";

struct SyntheticSpec {
  std::size_t n_attentive = 900;
  std::size_t n_inattentive = 100;
  std::size_t n_variables = 20;
  // One entry per variable, or a single entry shared by all.
  std::vector<int> categories = {4};
  // Probability that a child copies the planted function of its parent.
  double strength = 0.9;
  std::uint64_t seed = 0;
};

struct SyntheticSurvey {
  RawTable table;  // respondent_id, q01..qNN, attention_check
  std::vector<bool> inattentive;
  std::vector<std::size_t> parent;  // planted tree; parent[0] unused
};

inline int categories_of(const SyntheticSpec& spec, std::size_t v) {
  return spec.categories.size() == 1 ? spec.categories[0] : spec.categories[v];
}

// Attentive rows come from ancestral sampling of a random tree rooted at the
// first variable: each child takes a fixed function of its parent's answer
// with probability `strength`, otherwise a uniform answer. Inattentive rows
// answer every question uniformly at random. Row order is shuffled.
inline SyntheticSurvey generate(const SyntheticSpec& spec) {
  const std::size_t n = spec.n_attentive + spec.n_inattentive;
  if (n == 0) throw config_error("synthetic survey needs at least one respondent");
  if (spec.n_variables < 2) throw config_error("synthetic survey needs at least two variables");
  if (spec.categories.size() != 1 && spec.categories.size() != spec.n_variables)
    throw config_error("categories must have one entry or one per variable");
  for (int k : spec.categories)
    if (k < 2) throw config_error("every variable needs at least two categories");
  if (!(spec.strength >= 0.0 && spec.strength <= 1.0)) throw config_error("strength must lie in [0, 1]");

  Rng rng(derive_seed(spec.seed, 10));
  const std::size_t nv = spec.n_variables;
  SyntheticSurvey out;
  out.parent.assign(nv, 0);
  std::vector<std::vector<int>> link(nv);
  for (std::size_t v = 1; v < nv; ++v) {
    out.parent[v] = rng.below(v);
    const int kp = categories_of(spec, out.parent[v]);
    const int kc = categories_of(spec, v);
    std::vector<int> perm(static_cast<std::size_t>(kc));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (int a = 0; a < kp; ++a) link[v].push_back(perm[static_cast<std::size_t>(a % kc)]);
  }

  std::vector<std::vector<int>> answers;
  answers.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<int> row(nv);
    const bool careless = r >= spec.n_attentive;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto k = static_cast<std::uint64_t>(categories_of(spec, v));
      if (careless || v == 0 || rng.uniform() >= spec.strength)
        row[v] = static_cast<int>(rng.below(k));
      else
        row[v] = link[v][static_cast<std::size_t>(row[out.parent[v]])];
    }
    answers.push_back(std::move(row));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  out.table.columns.push_back(kIdColumn);
  for (std::size_t v = 0; v < nv; ++v) {
    char name[32];
    std::snprintf(name, sizeof name, "q%02zu", v + 1);
    out.table.columns.push_back(name);
  }
  out.table.columns.push_back(kCheckColumn);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    const bool careless = src >= spec.n_attentive;
    std::vector<std::string> row;
    char id[32];
    std::snprintf(id, sizeof id, "r%05zu", i + 1);
    row.emplace_back(id);
    for (int a : answers[src]) row.push_back("opt" + std::to_string(a + 1));
    row.emplace_back(careless ? "fail" : "pass");
    out.table.rows.push_back(std::move(row));
    out.inattentive.push_back(careless);
  }
  return out;
}

inline std::string labels_csv(const SyntheticSurvey& s) {
  std::string out = std::string(kIdColumn) + ",inattentive\n";
  for (std::size_t r = 0; r < s.table.rows.size(); ++r)
    out += s.table.rows[r][0] + (s.inattentive[r] ? ",1\n" : ",0\n");
  return out;
}

}  // namespace surveyqc::synth
