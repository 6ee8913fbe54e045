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


#include <gtest/gtest.h>

#include "support.hpp"

using namespace surveyqc;
using namespace surveyqc::chowliu;

namespace {

struct Toy {
  SurveySchema schema;
  CategoricalMatrix data;
  std::size_t age, sex, grade, height, weight;
};

Toy toy() {
  Toy t;
  auto table = fixtures::toy_table();
  t.schema = infer_schema(table);
  t.data = categorical_view(encode(table, t.schema));
  t.age = fixtures::variable_index(t.schema, "age");
  t.sex = fixtures::variable_index(t.schema, "sex");
  t.grade = fixtures::variable_index(t.schema, "grade");
  t.height = fixtures::variable_index(t.schema, "height");
  t.weight = fixtures::variable_index(t.schema, "weight");
  return t;
}

int cat(const Toy& t, std::size_t v, const std::string& label) {
  const auto& c = t.schema.variables[v].categories;
  return static_cast<int>(std::find(c.begin(), c.end(), label) - c.begin());
}

CategoricalMatrix matrix(const std::vector<std::vector<int>>& rows, std::vector<int> card) {
  CategoricalMatrix m;
  m.rows = rows.size();
  m.cols = card.size();
  m.cardinality = std::move(card);
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  return m;
}

}  // namespace

TEST(PairwiseJoint, EmptyDataIsUniform) {
  auto s = pairwise_joint(matrix({}, {2, 2}), 0, 1, 1.0);
  for (double p : s.joint) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(PairwiseJoint, MatchesCountAndNormalize) {
  auto m = matrix({{0, 2}, {1, 0}, {0, 2}, {1, 1}, {0, 0}, {0, 2}}, {2, 3});
  auto s = pairwise_joint(m, 0, 1, 0.5);
  double counts[2][3] = {};
  for (std::size_t r = 0; r < m.rows; ++r) counts[m.at(r, 0)][m.at(r, 1)] += 1;
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      EXPECT_NEAR(s.p(a, b), (counts[a][b] + 0.5) / (6 + 0.5 * 6), 1e-15);
      total += s.p(a, b);
    }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(s.row_marginal[0], (4 + 1.5) / 9.0, 1e-15);
}

TEST(PairwiseJoint, ToyWeightGivenHeightShort) {
  auto t = toy();
  auto s = pairwise_joint(t.data, t.height, t.weight, 1.0);
  const int h1 = cat(t, t.height, "short");
  double row = 0.0;
  for (int b = 0; b < s.cols_k; ++b) row += static_cast<double>(s.counts[static_cast<std::size_t>(h1 * s.cols_k + b)]);
  // Conditioning the Laplace counts on H = short.
  auto cond = [&](const std::string& w) {
    const int b = cat(t, t.weight, w);
    return (static_cast<double>(s.counts[static_cast<std::size_t>(h1 * s.cols_k + b)]) + 1.0) / (row + 3.0);
  };
  EXPECT_NEAR(cond("light"), 3.0 / 5.0, 1e-15);
  EXPECT_NEAR(cond("average"), 1.0 / 5.0, 1e-15);
  EXPECT_NEAR(cond("heavy"), 1.0 / 5.0, 1e-15);
}

TEST(MutualInformation, FactorizedJointIsZero) {
  SmoothedJoint s;
  s.rows_k = 2;
  s.cols_k = 3;
  s.row_marginal = {0.3, 0.7};
  s.col_marginal = {0.2, 0.5, 0.3};
  for (double a : s.row_marginal)
    for (double b : s.col_marginal) s.joint.push_back(a * b);
  EXPECT_NEAR(mutual_information(s), 0.0, 1e-15);
}

TEST(MutualInformation, CopiedBinaryColumnsApproachLn2) {
  Rng rng(5);
  std::vector<std::vector<int>> rows;
  double ones = 0.0;
  for (int r = 0; r < 1000; ++r) {
    int v = static_cast<int>(rng.below(2));
    ones += v;
    rows.push_back({v, v});
  }
  auto m = matrix(rows, {2, 2});
  auto s = pairwise_joint(m, 0, 1, 1.0);
  // Closed form from the smoothed table.
  double oracle = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double pab = s.p(a, b);
      oracle += pab * std::log(pab / (s.row_marginal[a] * s.col_marginal[b]));
    }
  EXPECT_NEAR(mutual_information(s), oracle, 1e-12);
  // Copying makes MI the column entropy, up to smoothing.
  const double q = ones / 1000.0;
  const double entropy = -q * std::log(q) - (1 - q) * std::log(1 - q);
  EXPECT_LT(mutual_information(s), entropy);
  EXPECT_NEAR(mutual_information(s), entropy, 0.02);
}

TEST(MutualInformation, IndependentColumnsNearZeroAndCopyDominates) {
  Rng rng(9);
  std::vector<std::vector<int>> rows;
  for (int r = 0; r < 5000; ++r) {
    int a = static_cast<int>(rng.below(3));
    rows.push_back({a, a, static_cast<int>(rng.below(3))});
  }
  auto m = matrix(rows, {3, 3, 3});
  const double indep = mutual_information(pairwise_joint(m, 0, 2));
  EXPECT_GE(indep, 0.0);
  EXPECT_LT(indep, 0.005);
  EXPECT_GT(mutual_information(pairwise_joint(m, 0, 1)), indep);
}

TEST(MutualInformation, Symmetric) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<int>> rows;
    for (int r = 0; r < 40; ++r)
      rows.push_back({static_cast<int>(rng.below(3)), static_cast<int>(rng.below(4))});
    auto m = matrix(rows, {3, 4});
    EXPECT_NEAR(mutual_information(pairwise_joint(m, 0, 1)), mutual_information(pairwise_joint(m, 1, 0)), 1e-12);
  }
}

TEST(BuildTree, PrimMatchesPruferEnumeration) {
  Rng rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + rng.below(4);
    auto w = fixtures::random_weights(rng, n);
    auto tree = build_tree(w);
    EXPECT_EQ(fixtures::canonical_weight(fixtures::tree_edges(tree), w), fixtures::prufer_max_weight(w));
  }
}

TEST(BuildTree, IsASpanningTreeOrientedFromRoot) {
  Rng rng(7);
  auto w = fixtures::random_weights(rng, 6);
  auto tree = build_tree(w);
  EXPECT_EQ(tree.parent[tree.root], TreeStructure::npos);
  std::size_t edges = 0;
  for (std::size_t j = 0; j < tree.size(); ++j) {
    if (j == tree.root) continue;
    ++edges;
    std::size_t cur = j, hops = 0;
    while (cur != tree.root && hops++ < tree.size()) cur = tree.parent[cur];
    EXPECT_EQ(cur, tree.root);
  }
  EXPECT_EQ(edges, 5u);
}

TEST(BuildTree, TwoNodesTieGoesToLowerIndex) {
  SquareMatrix w(2);
  w(0, 1) = w(1, 0) = 0.3;
  auto tree = build_tree(w);
  EXPECT_EQ(tree.root, 0u);
  EXPECT_EQ(tree.parent[1], 0u);
}

TEST(BuildTree, RootIsLargestRowSum) {
  SquareMatrix w(3);
  w(0, 1) = w(1, 0) = 0.1;
  w(1, 2) = w(2, 1) = 0.5;
  w(0, 2) = w(2, 0) = 0.2;
  EXPECT_EQ(build_tree(w).root, 2u);
}

TEST(BuildTree, FewerThanTwoNodesIsAnError) { EXPECT_THROW(build_tree(SquareMatrix(1)), Error); }

TEST(Fit, ToyTreeWithHeightRoot) {
  auto t = toy();
  FitOptions opts;
  opts.root = t.height;
  auto m = fit(t.data, opts);
  EXPECT_EQ(m.tree.root, t.height);
  EXPECT_EQ(m.tree.parent[t.weight], t.height);
  EXPECT_EQ(m.tree.parent[t.sex], t.height);
  EXPECT_EQ(m.tree.parent[t.age], t.height);
  EXPECT_EQ(m.tree.parent[t.grade], t.age);

  EXPECT_NEAR(m.root_marginal[static_cast<std::size_t>(cat(t, t.height, "short"))], 3.0 / 13.0, 1e-15);
  EXPECT_NEAR(m.root_marginal[static_cast<std::size_t>(cat(t, t.height, "medium"))], 6.0 / 13.0, 1e-15);
  EXPECT_NEAR(m.root_marginal[static_cast<std::size_t>(cat(t, t.height, "tall"))], 4.0 / 13.0, 1e-15);

  const int a1 = cat(t, t.age, "12-14");
  EXPECT_NEAR(m.cpts[t.grade](a1, cat(t, t.grade, "low")), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(m.cpts[t.grade](a1, cat(t, t.grade, "high")), 1.0 / 6.0, 1e-15);
}

TEST(Fit, ToyDefaultRootIsMiCentral) {
  // Under the stated counts the MI row-sum favours age; height needs the
  // explicit root.
  auto t = toy();
  auto mi = mutual_information_matrix(t.data);
  auto m = fit(t.data);
  EXPECT_EQ(m.tree.root, mi_central_node(mi));
  EXPECT_EQ(m.tree.root, t.age);
  FitOptions opts;
  opts.root = t.height;
  EXPECT_NEAR(tree_weight(fit(t.data, opts).tree, mi), tree_weight(m.tree, mi), 1e-15);
}

TEST(Fit, DistributionsAreNormalizedAndPositive) {
  synth::SyntheticSpec spec;
  spec.n_attentive = 150;
  spec.n_inattentive = 20;
  spec.n_variables = 8;
  auto enc = fixtures::encode_survey(synth::generate(spec));
  auto m = fit(categorical_view(enc.data));
  double total = 0.0;
  for (double p : m.root_marginal) {
    EXPECT_GT(p, 0.0);
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (std::size_t j = 0; j < m.cpts.size(); ++j) {
    if (j == m.tree.root) continue;
    const auto& t = m.cpts[j];
    for (int a = 0; a < t.parent_k; ++a) {
      double row = 0.0;
      for (int b = 0; b < t.child_k; ++b) {
        EXPECT_GT(t(a, b), 0.0);
        row += t(a, b);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(Fit, ZeroRowsGiveUniformTables) {
  auto m = fit(matrix({}, {3, 2, 4}));
  for (double p : m.root_marginal) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  for (std::size_t j = 0; j < 3; ++j)
    if (j != m.tree.root)
      for (double p : m.cpts[j].prob) EXPECT_NEAR(p, 1.0 / m.cpts[j].child_k, 1e-15);
}

TEST(LogLikelihood, ToyGoodAndBadRows) {
  auto t = toy();
  FitOptions opts;
  opts.root = t.height;
  auto m = fit(t.data, opts);
  // Schema order is age, sex, grade, height, weight.
  auto good = fixtures::indices_of(t.schema, {"15-17", "M", "high", "tall", "heavy"});
  auto bad = fixtures::indices_of(t.schema, {"12-14", "F", "high", "short", "heavy"});
  const double p_good = (4.0 / 13) * (1.0 / 2) * (3.0 / 5) * (4.0 / 5) * (3.0 / 4);
  const double p_bad = (3.0 / 13) * (1.0 / 5) * (3.0 / 4) * (3.0 / 4) * (1.0 / 6);
  EXPECT_NEAR(std::exp(log_likelihood(m, good)), p_good, 1e-9);
  // The quoted -2.90 is ln(0.055), taken after rounding the probability.
  EXPECT_NEAR(log_likelihood(m, good), -2.90, 0.01);
  EXPECT_NEAR(log_likelihood(m, bad), std::log(p_bad), 1e-6);
  EXPECT_NEAR(log_likelihood(m, bad), -5.44, 0.005);
}

TEST(LogLikelihood, EqualsProductOfLookups) {
  auto t = toy();
  auto m = fit(t.data);
  for (std::size_t r = 0; r < t.data.rows; ++r) {
    auto row = t.data.row(r);
    double prod = m.root_marginal[static_cast<std::size_t>(row[m.tree.root])];
    for (std::size_t j = 0; j < row.size(); ++j)
      if (j != m.tree.root) prod *= m.cpts[j](row[m.tree.parent[j]], row[j]);
    EXPECT_NEAR(std::exp(log_likelihood(m, row)), prod, 1e-12);
  }
}

TEST(LogLikelihood, SingleTrainingRowIsTheMode) {
  auto data = matrix({{1, 0, 2}}, {2, 2, 3});
  auto m = fit(data);
  const double own = log_likelihood(m, data.row(0));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 3; ++c) {
        std::vector<int> row = {a, b, c};
        if (row == std::vector<int>{1, 0, 2}) continue;
        EXPECT_LT(log_likelihood(m, row), own);
      }
}

TEST(LogLikelihood, CategoryRelabelingInvariant) {
  Rng rng(13);
  std::vector<std::vector<int>> rows;
  for (int r = 0; r < 60; ++r) {
    int a = static_cast<int>(rng.below(3));
    rows.push_back({a, (a + static_cast<int>(rng.below(2))) % 3, static_cast<int>(rng.below(2))});
  }
  std::vector<int> perm = {2, 0, 1};
  auto relabeled = rows;
  for (auto& r : relabeled) r[0] = perm[static_cast<std::size_t>(r[0])];
  auto m1 = fit(matrix(rows, {3, 3, 2}));
  auto m2 = fit(matrix(relabeled, {3, 3, 2}));
  for (std::size_t r = 0; r < rows.size(); ++r)
    EXPECT_NEAR(log_likelihood(m1, rows[r]), log_likelihood(m2, relabeled[r]), 1e-12);
}

TEST(LogLikelihood, OutOfRangeCategoryIsAnError) {
  auto m = fit(matrix({{0, 1}}, {2, 2}));
  std::vector<int> row = {0, 2};
  EXPECT_THROW(log_likelihood(m, row), Error);
}

TEST(TypicalityPercentile, Endpoints) {
  std::vector<double> ll = {-1.0, -2.0, -3.0};
  EXPECT_EQ(typicality_percentile(ll), (std::vector<double>{1.0, 0.5, 0.0}));
}

TEST(TypicalityPercentile, BijectionForDistinctValues) {
  Rng rng(3);
  std::vector<double> ll;
  for (int i = 0; i < 11; ++i) ll.push_back(rng.uniform(-10, 0));
  auto pct = typicality_percentile(ll);
  std::sort(pct.begin(), pct.end());
  for (std::size_t i = 0; i < pct.size(); ++i) EXPECT_DOUBLE_EQ(pct[i], static_cast<double>(i) / 10.0);
}

TEST(TypicalityPercentile, TiesKeepRespondentOrder) {
  std::vector<double> ll = {-1.0, -1.0, -2.0};
  EXPECT_EQ(typicality_percentile(ll), (std::vector<double>{1.0, 0.5, 0.0}));
  std::vector<double> one = {-1.0};
  EXPECT_THROW(typicality_percentile(one), Error);
}

TEST(ChowLiuJson, RoundTripScoresBitForBit) {
  auto t = toy();
  auto m = fit(t.data, {}, t.schema.fingerprint());
  auto back = chowliu_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(log_likelihoods(back, t.data), log_likelihoods(m, t.data));
  EXPECT_EQ(back.schema_fingerprint, t.schema.fingerprint());
}
