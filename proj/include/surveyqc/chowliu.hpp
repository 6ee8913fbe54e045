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

// Chow-Liu tree Bayesian network over categorical survey variables.
//
// Structure learning takes Laplace-smoothed pairwise joints, weighs every
// variable pair by their mutual information and keeps the maximum-weight
// spanning tree. The tree is oriented away from the most MI-central variable
// and each edge gets a smoothed conditional probability table. Respondents
// are scored by the tree log-likelihood of their answers.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surveyqc/common.hpp"
#include "surveyqc/survey_data.hpp"

namespace surveyqc::chowliu {

// Square matrix of doubles, row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Smoothed empirical joint of two categorical variables.
struct SmoothedJoint {
  int rows_k = 0;  // K_i
  int cols_k = 0;  // K_j
  std::vector<long> counts;   // K_i x K_j co-occurrence counts
  long total = 0;             // N
  double alpha = 1.0;
  std::vector<double> joint;  // smoothed p(a, b), row-major
  std::vector<double> row_marginal;
  std::vector<double> col_marginal;

  double p(int a, int b) const { return joint[static_cast<std::size_t>(a * cols_k + b)]; }
};

inline SmoothedJoint pairwise_joint(const CategoricalMatrix& data, std::size_t i, std::size_t j,
                                    double alpha = 1.0) {
  if (data.cols == 0) throw data_error("pairwise_joint: data has no variables");
  if (i >= data.cols || j >= data.cols) throw data_error("pairwise_joint: variable index out of range");
  if (!(alpha > 0.0)) throw config_error("Laplace alpha must be positive");

  SmoothedJoint s;
  s.rows_k = data.cardinality[i];
  s.cols_k = data.cardinality[j];
  s.alpha = alpha;
  s.total = static_cast<long>(data.rows);
  s.counts.assign(static_cast<std::size_t>(s.rows_k * s.cols_k), 0);
  for (std::size_t r = 0; r < data.rows; ++r)
    ++s.counts[static_cast<std::size_t>(data.at(r, i) * s.cols_k + data.at(r, j))];

  const double denom = static_cast<double>(s.total) + alpha * s.rows_k * s.cols_k;
  s.joint.resize(s.counts.size());
  for (std::size_t c = 0; c < s.counts.size(); ++c)
    s.joint[c] = (static_cast<double>(s.counts[c]) + alpha) / denom;
  s.row_marginal.assign(static_cast<std::size_t>(s.rows_k), 0.0);
  s.col_marginal.assign(static_cast<std::size_t>(s.cols_k), 0.0);
  for (int a = 0; a < s.rows_k; ++a)
    for (int b = 0; b < s.cols_k; ++b) {
      s.row_marginal[static_cast<std::size_t>(a)] += s.p(a, b);
      s.col_marginal[static_cast<std::size_t>(b)] += s.p(a, b);
    }
  return s;
}

// Natural-log mutual information of a smoothed joint, clamped at zero.
inline double mutual_information(const SmoothedJoint& s) {
  double mi = 0.0;
  for (int a = 0; a < s.rows_k; ++a)
    for (int b = 0; b < s.cols_k; ++b) {
      double pab = s.p(a, b);
      mi += pab * std::log(pab / (s.row_marginal[static_cast<std::size_t>(a)] *
                                  s.col_marginal[static_cast<std::size_t>(b)]));
    }
  return std::max(mi, 0.0);
}

inline SquareMatrix mutual_information_matrix(const CategoricalMatrix& data, double alpha = 1.0) {
  SquareMatrix mi(data.cols);
  for (std::size_t i = 0; i < data.cols; ++i)
    for (std::size_t j = i + 1; j < data.cols; ++j) {
      double w = mutual_information(pairwise_joint(data, i, j, alpha));
      mi(i, j) = w;
      mi(j, i) = w;
    }
  return mi;
}

struct TreeStructure {
  std::size_t root = 0;
  // parent[j] for j != root; parent[root] == npos.
  std::vector<std::size_t> parent;
  // Nodes in the order Prim attached them; root first. Parents always
  // precede their children.
  std::vector<std::size_t> order;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t size() const { return parent.size(); }
};

// Index of the node with the largest MI row-sum; lower index wins ties.
inline std::size_t mi_central_node(const SquareMatrix& mi) {
  std::size_t best = 0;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mi.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < mi.size(); ++j) sum += mi(i, j);
    if (sum > best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

// Maximum-weight spanning tree by Prim's algorithm, grown from the root so
// every edge comes out oriented parent -> child.
//
// Without an explicit root the MI-central node is used. Ties between equal
// candidate edges go to the lower parent index, then the lower child index.
inline TreeStructure build_tree(const SquareMatrix& weights,
                                std::optional<std::size_t> root = std::nullopt) {
  const std::size_t n = weights.size();
  if (n < 2) throw data_error("a Chow-Liu tree needs at least two variables");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(weights(i, j))) throw numeric_error("non-finite MI weight");

  TreeStructure tree;
  tree.root = root.value_or(mi_central_node(weights));
  if (tree.root >= n) throw config_error("tree root index out of range");
  tree.parent.assign(n, TreeStructure::npos);
  tree.order.push_back(tree.root);

  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> link(n, TreeStructure::npos);
  auto relax = [&](std::size_t u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      double w = weights(u, v);
      if (w > best[v] || (w == best[v] && u < link[v])) {
        best[v] = w;
        link[v] = u;
      }
    }
  };
  in_tree[tree.root] = true;
  relax(tree.root);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = TreeStructure::npos;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (next == TreeStructure::npos || best[v] > best[next] ||
          (best[v] == best[next] && link[v] < link[next]))
        next = v;
    }
    in_tree[next] = true;
    tree.parent[next] = link[next];
    tree.order.push_back(next);
    relax(next);
  }
  return tree;
}

inline double tree_weight(const TreeStructure& tree, const SquareMatrix& weights) {
  double total = 0.0;
  for (std::size_t j = 0; j < tree.size(); ++j)
    if (j != tree.root) total += weights(tree.parent[j], j);
  return total;
}

// Row-stochastic K_parent x K_child table.
struct ConditionalTable {
  int parent_k = 0;
  int child_k = 0;
  std::vector<double> prob;

  double operator()(int parent_value, int child_value) const {
    return prob[static_cast<std::size_t>(parent_value * child_k + child_value)];
  }
};

struct ChowLiuModel {
  TreeStructure tree;
  std::vector<int> cardinality;
  std::vector<double> root_marginal;
  // cpts[j] is empty for the root.
  std::vector<ConditionalTable> cpts;
  double alpha = 1.0;
  std::string schema_fingerprint;

  std::size_t num_variables() const { return cardinality.size(); }
};

struct FitOptions {
  double alpha = 1.0;
  // Overrides the MI-central root.
  std::optional<std::size_t> root;
};

inline ChowLiuModel fit(const CategoricalMatrix& data, const FitOptions& opts = {},
                        std::string schema_fingerprint = {}) {
  if (data.cols < 2) throw data_error("Chow-Liu fit needs at least two variables");
  if (!(opts.alpha > 0.0)) throw config_error("Laplace alpha must be positive");
  const double alpha = opts.alpha;

  ChowLiuModel model;
  model.alpha = alpha;
  model.cardinality = data.cardinality;
  model.schema_fingerprint = std::move(schema_fingerprint);
  model.tree = build_tree(mutual_information_matrix(data, alpha), opts.root);

  const std::size_t r = model.tree.root;
  const int kr = data.cardinality[r];
  std::vector<long> root_counts(static_cast<std::size_t>(kr), 0);
  for (std::size_t n = 0; n < data.rows; ++n) ++root_counts[static_cast<std::size_t>(data.at(n, r))];
  const double root_denom = static_cast<double>(data.rows) + alpha * kr;
  for (long c : root_counts) model.root_marginal.push_back((static_cast<double>(c) + alpha) / root_denom);

  model.cpts.resize(data.cols);
  for (std::size_t c = 0; c < data.cols; ++c) {
    if (c == r) continue;
    const std::size_t p = model.tree.parent[c];
    ConditionalTable t;
    t.parent_k = data.cardinality[p];
    t.child_k = data.cardinality[c];
    std::vector<long> pair(static_cast<std::size_t>(t.parent_k * t.child_k), 0);
    std::vector<long> parent_counts(static_cast<std::size_t>(t.parent_k), 0);
    for (std::size_t n = 0; n < data.rows; ++n) {
      ++pair[static_cast<std::size_t>(data.at(n, p) * t.child_k + data.at(n, c))];
      ++parent_counts[static_cast<std::size_t>(data.at(n, p))];
    }
    t.prob.resize(pair.size());
    for (int kp = 0; kp < t.parent_k; ++kp) {
      const double denom = static_cast<double>(parent_counts[static_cast<std::size_t>(kp)]) + alpha * t.child_k;
      for (int kc = 0; kc < t.child_k; ++kc) {
        auto idx = static_cast<std::size_t>(kp * t.child_k + kc);
        t.prob[idx] = (static_cast<double>(pair[idx]) + alpha) / denom;
      }
    }
    model.cpts[c] = std::move(t);
  }
  return model;
}

// Natural-log likelihood of one respondent under the tree.
inline double log_likelihood(const ChowLiuModel& model, std::span<const int> row) {
  if (row.size() != model.num_variables()) throw data_error("row arity does not match the model");
  for (std::size_t j = 0; j < row.size(); ++j)
    if (row[j] < 0 || row[j] >= model.cardinality[j]) throw data_error("category index out of range");
  const std::size_t r = model.tree.root;
  double ll = std::log(model.root_marginal[static_cast<std::size_t>(row[r])]);
  for (std::size_t j : model.tree.order) {
    if (j == r) continue;
    ll += std::log(model.cpts[j](row[model.tree.parent[j]], row[j]));
  }
  return ll;
}

inline std::vector<double> log_likelihoods(const ChowLiuModel& model, const CategoricalMatrix& data) {
  std::vector<double> out(data.rows);
  for (std::size_t n = 0; n < data.rows; ++n) out[n] = log_likelihood(model, data.row(n));
  return out;
}

// Rank-based typicality: 1 for the highest log-likelihood, 0 for the lowest.
// Equal values keep ascending respondent order.
inline std::vector<double> typicality_percentile(std::span<const double> logliks) {
  const std::size_t n = logliks.size();
  if (n < 2) throw data_error("typicality percentile needs at least two respondents");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return logliks[a] > logliks[b]; });
  std::vector<double> pct(n);
  for (std::size_t rank0 = 0; rank0 < n; ++rank0)
    pct[idx[rank0]] = 1.0 - static_cast<double>(rank0) / static_cast<double>(n - 1);
  return pct;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json to_json(const ChowLiuModel& m) {
  nlohmann::ordered_json doc;
  doc["format"] = "surveyqc.chowliu";
  doc["version"] = 1;
  doc["alpha"] = m.alpha;
  doc["schema_fingerprint"] = m.schema_fingerprint;
  doc["cardinality"] = m.cardinality;
  nlohmann::ordered_json parent = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < m.tree.size(); ++j)
    parent.push_back(j == m.tree.root ? -1 : static_cast<long>(m.tree.parent[j]));
  doc["tree"] = {{"root", m.tree.root}, {"parent", parent}, {"order", m.tree.order}};
  doc["root_marginal"] = m.root_marginal;
  nlohmann::ordered_json cpts = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < m.cpts.size(); ++j) {
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    const auto& t = m.cpts[j];
    for (int kp = 0; kp < t.parent_k; ++kp) {
      std::vector<double> row(t.prob.begin() + kp * t.child_k, t.prob.begin() + (kp + 1) * t.child_k);
      table.push_back(row);
    }
    cpts.push_back(std::move(table));
  }
  doc["cpts"] = std::move(cpts);
  return doc;
}

inline ChowLiuModel chowliu_from_json(const nlohmann::json& doc) {
  ChowLiuModel m;
  try {
    if (doc.at("format").get<std::string>() != "surveyqc.chowliu")
      throw data_error("not a Chow-Liu model file");
    m.alpha = doc.at("alpha").get<double>();
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    m.cardinality = doc.at("cardinality").get<std::vector<int>>();
    const auto& tree = doc.at("tree");
    m.tree.root = tree.at("root").get<std::size_t>();
    for (long p : tree.at("parent").get<std::vector<long>>())
      m.tree.parent.push_back(p < 0 ? TreeStructure::npos : static_cast<std::size_t>(p));
    m.tree.order = tree.at("order").get<std::vector<std::size_t>>();
    m.root_marginal = doc.at("root_marginal").get<std::vector<double>>();
    const auto& cpts = doc.at("cpts");
    if (cpts.size() != m.cardinality.size() || m.tree.parent.size() != m.cardinality.size())
      throw data_error("Chow-Liu model arrays disagree in length");
    m.cpts.resize(cpts.size());
    for (std::size_t j = 0; j < cpts.size(); ++j) {
      if (j == m.tree.root) continue;
      auto rows = cpts[j].get<std::vector<std::vector<double>>>();
      ConditionalTable t;
      t.parent_k = static_cast<int>(rows.size());
      t.child_k = rows.empty() ? 0 : static_cast<int>(rows[0].size());
      if (t.parent_k != m.cardinality[m.tree.parent[j]] || t.child_k != m.cardinality[j])
        throw data_error("CPT shape does not match variable cardinalities");
      for (const auto& row : rows) t.prob.insert(t.prob.end(), row.begin(), row.end());
      m.cpts[j] = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed Chow-Liu model JSON: ") + e.what());
  }
  return m;
}

}  // namespace surveyqc::chowliu
