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


// Shared fixtures and brute-force oracles for the test suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "surveyqc/surveyqc.hpp"

namespace surveyqc::fixtures {

// Ten respondents over age, sex, grade, height and weight whose smoothed
// counts give the worked toy tree: height root, height -> {weight, sex, age},
// age -> grade.
inline RawTable toy_table() {
  RawTable t;
  t.columns = {"age", "sex", "grade", "height", "weight"};
  t.rows = {
      {"12-14", "M", "low", "medium", "average"}, {"12-14", "M", "low", "medium", "heavy"},
      {"12-14", "F", "low", "short", "light"},    {"12-14", "F", "low", "short", "light"},
      {"15-17", "M", "high", "medium", "light"},  {"15-17", "M", "high", "tall", "average"},
      {"15-17", "M", "high", "tall", "heavy"},    {"15-17", "F", "low", "tall", "heavy"},
      {"15-17", "F", "high", "medium", "average"}, {"15-17", "F", "high", "medium", "average"},
  };
  return t;
}

inline std::string toy_csv() { return csv::format(toy_table()); }

// Category indices for a row given as labels, in schema variable order.
inline std::vector<int> indices_of(const SurveySchema& schema, const std::vector<std::string>& labels) {
  std::vector<int> out;
  for (std::size_t v = 0; v < schema.variables.size(); ++v) {
    const auto& cats = schema.variables[v].categories;
    out.push_back(static_cast<int>(std::find(cats.begin(), cats.end(), labels[v]) - cats.begin()));
  }
  return out;
}

inline std::size_t variable_index(const SurveySchema& schema, const std::string& name) {
  for (std::size_t v = 0; v < schema.variables.size(); ++v)
    if (schema.variables[v].name == name) return v;
  return static_cast<std::size_t>(-1);
}

// All-pairs concordance: P(score_pos > score_neg) + 0.5 P(tie).
inline double brute_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  return num / pairs;
}

using Edge = std::pair<std::size_t, std::size_t>;

// Tree weight summed over edges in sorted (low, high) order, so two edge
// sets compare exactly regardless of how they were found.
inline double canonical_weight(std::vector<Edge> edges, const chowliu::SquareMatrix& w) {
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  double total = 0.0;
  for (const auto& [a, b] : edges) total += w(a, b);
  return total;
}

inline std::vector<Edge> tree_edges(const chowliu::TreeStructure& t) {
  std::vector<Edge> out;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (j != t.root) out.emplace_back(t.parent[j], j);
  return out;
}

// Maximum spanning-tree weight over every labeled tree on n nodes, decoded
// from all n^(n-2) Pruefer sequences.
inline double prufer_max_weight(const chowliu::SquareMatrix& w) {
  const std::size_t n = w.size();
  if (n == 2) return w(0, 1);
  std::vector<std::size_t> seq(n - 2, 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> degree(n, 1);
    for (auto s : seq) ++degree[s];
    std::vector<Edge> edges;
    for (auto s : seq) {
      std::size_t leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      edges.emplace_back(leaf, s);
      --degree[leaf];
      --degree[s];
    }
    std::size_t u = n, v = n;
    for (std::size_t i = 0; i < n; ++i)
      if (degree[i] == 1) (u == n ? u : v) = i;
    edges.emplace_back(u, v);
    best = std::max(best, canonical_weight(edges, w));

    std::size_t pos = 0;
    while (pos < seq.size() && ++seq[pos] == n) seq[pos++] = 0;
    if (pos == seq.size()) break;
  }
  return best;
}

// Sort, keep floor(p * B / 100) (at least one) in integer arithmetic, average.
inline double naive_percentile_loss(std::vector<double> losses, int p) {
  std::sort(losses.begin(), losses.end());
  std::size_t k = static_cast<std::size_t>(p) * losses.size() / 100;
  if (k == 0) k = 1;
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += losses[i];
  return s / static_cast<double>(k);
}

// Random symmetric weight matrix with zero diagonal.
inline chowliu::SquareMatrix random_weights(Rng& rng, std::size_t n) {
  chowliu::SquareMatrix w(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = rng.uniform();
  return w;
}

// One-hot matrix built from category indices with the given cardinalities.
inline EncodedMatrix one_hot_rows(const std::vector<std::vector<int>>& rows, const std::vector<int>& card) {
  CategoricalMatrix cats;
  cats.rows = rows.size();
  cats.cols = card.size();
  cats.cardinality = card;
  for (const auto& r : rows) cats.values.insert(cats.values.end(), r.begin(), r.end());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(std::to_string(i + 1));
  return one_hot(cats, blocks_for(card), ids);
}

// Encodes a generated survey with its id and attention-check columns held out.
struct EncodedSurvey {
  SurveySchema schema;
  EncodedMatrix data;
  std::vector<bool> inattentive;
};

inline EncodedSurvey encode_survey(const synth::SyntheticSurvey& s) {
  IngestOptions opts;
  opts.id_column = synth::kIdColumn;
  opts.excluded_columns = {synth::kCheckColumn};
  EncodedSurvey out;
  out.schema = infer_schema(s.table, opts);
  out.data = encode(s.table, out.schema, opts);
  out.inattentive = s.inattentive;
  return out;
}

// Finite-difference check of the analytic gradient of the batch objective.
// Returns the worst relative error |a - n| / max(1e-8, |a| + |n|) over all
// parameters.
inline double gradient_check(ae::AEModel model, const ae::Matrix& x, double percentile, double step = 1e-5) {
  const auto analytic = ae::batch_objective(model, x, percentile, true).gradient;
  ae::ParamSet g = analytic;
  auto grads = ae::parameter_handles(g);
  ae::ParamSet params = model.params();
  auto handles = ae::parameter_handles(params);
  double worst = 0.0;
  for (std::size_t i = 0; i < handles.size(); ++i) {
    const double saved = *handles[i];
    *handles[i] = saved + step;
    ae::set_params(model, params);
    const double up = ae::batch_objective(model, x, percentile, true, nullptr, false).objective;
    *handles[i] = saved - step;
    ae::set_params(model, params);
    const double down = ae::batch_objective(model, x, percentile, true, nullptr, false).objective;
    *handles[i] = saved;
    ae::set_params(model, params);
    const double numeric = (up - down) / (2.0 * step);
    const double a = *grads[i];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace surveyqc::fixtures
