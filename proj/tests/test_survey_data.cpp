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

namespace {

RawTable single_column(const std::vector<std::string>& values, const std::string& name = "q") {
  RawTable t;
  t.columns = {name};
  for (const auto& v : values) t.rows.push_back({v});
  return t;
}

}  // namespace

TEST(InferSchema, TwentyFiveDistinctNumbersAreNumeric) {
  std::vector<std::string> vals;
  for (int i = 1; i <= 25; ++i) vals.push_back(std::to_string(i));
  auto s = infer_schema(single_column(vals));
  ASSERT_EQ(s.variables.size(), 1u);
  EXPECT_EQ(s.variables[0].kind, VariableKind::numeric);
  EXPECT_DOUBLE_EQ(s.variables[0].mean, 13.0);
  // Population variance of 1..25 is (25^2 - 1) / 12 = 52.
  EXPECT_NEAR(s.variables[0].stddev, std::sqrt(52.0), 1e-12);
  EXPECT_EQ(s.variables[0].block_size(), 6u);
}

TEST(InferSchema, FewDistinctNumbersAreCategorical) {
  auto s = infer_schema(single_column({"1", "2", "3", "1", "2", "3"}));
  EXPECT_EQ(s.variables[0].kind, VariableKind::categorical);
  EXPECT_EQ(s.variables[0].categories, (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_FALSE(s.variables[0].has_missing);
}

TEST(InferSchema, MissingCellAddsMissingCategory) {
  auto s = infer_schema(single_column({"a", "b", "a", ""}));
  EXPECT_EQ(s.variables[0].categories, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(s.variables[0].has_missing);
}

TEST(InferSchema, MissingMarkersAreNotCountedAsValues) {
  std::vector<std::string> vals;
  for (int i = 1; i <= 19; ++i) vals.push_back(std::to_string(i));
  vals.push_back("NA");
  vals.push_back("n/a");
  auto s = infer_schema(single_column(vals));
  EXPECT_EQ(s.variables[0].kind, VariableKind::categorical);
  EXPECT_EQ(s.variables[0].categories.size(), 19u);
  EXPECT_TRUE(s.variables[0].has_missing);
}

TEST(InferSchema, DropsDegenerateColumns) {
  set_quiet(true);
  RawTable t;
  t.columns = {"const", "empty", "ok"};
  t.rows = {{"x", "", "a"}, {"x", "NA", "b"}};
  auto s = infer_schema(t);
  set_quiet(false);
  ASSERT_EQ(s.variables.size(), 1u);
  EXPECT_EQ(s.variables[0].name, "ok");
}

TEST(InferSchema, EmptyTableIsAnError) {
  RawTable t;
  t.columns = {"a"};
  EXPECT_THROW(infer_schema(t), Error);
}

TEST(Discretize, BinsFollowTheThresholds) {
  EXPECT_EQ(discretize(-1.5), "Bottom-extreme");
  EXPECT_EQ(discretize(0.0), "Normal");
  EXPECT_EQ(discretize(0.7), "Normal");
  EXPECT_EQ(discretize(-0.7), "Normal");
  EXPECT_EQ(discretize(-1.4), "Low");
  EXPECT_EQ(discretize(1.4), "High");
  EXPECT_EQ(discretize(1.41), "Top-extreme");
  EXPECT_EQ(discretize(std::nullopt), "Missing");
}

TEST(Discretize, NonFiniteIsNumericError) {
  EXPECT_THROW(discretize(std::nan("")), Error);
  try {
    discretize_index(std::numeric_limits<double>::infinity());
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST(Discretize, MonotoneOnFiniteInputs) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    double a = rng.uniform(-4, 4), b = rng.uniform(-4, 4);
    if (a > b) std::swap(a, b);
    EXPECT_LE(discretize_index(a), discretize_index(b));
  }
}

TEST(Encode, OneHotOfSecondCategory) {
  RawTable t = single_column({"x", "y", "z", "y"});
  auto s = infer_schema(t);
  auto m = encode(t, s);
  ASSERT_EQ(m.cols, 3u);
  EXPECT_EQ(m.at(3, 0), 0);
  EXPECT_EQ(m.at(3, 1), 1);
  EXPECT_EQ(m.at(3, 2), 0);
}

TEST(Encode, MissingCellSetsMissingFeature) {
  RawTable t = single_column({"x", "", "y"});
  auto s = infer_schema(t);
  auto m = encode(t, s);
  ASSERT_EQ(m.cols, 3u);
  EXPECT_EQ(m.at(1, 2), 1);
  EXPECT_EQ(s.variables[0].feature_label(2), "Missing");
}

TEST(Encode, BlockSizesAddUp) {
  RawTable t;
  t.columns = {"a", "b"};
  for (int r = 0; r < 10; ++r)
    t.rows.push_back({std::string(1, static_cast<char>('p' + r % 3)), r == 4 ? "" : (r % 2 ? "u" : "v")});
  auto s = infer_schema(t);
  auto m = encode(t, s);
  EXPECT_EQ(m.cols, 6u);
  ASSERT_EQ(m.blocks.size(), 2u);
  EXPECT_EQ(m.blocks[0], (Block{0, 0, 3}));
  EXPECT_EQ(m.blocks[1], (Block{1, 3, 6}));
}

TEST(Encode, NumericUsesStoredStatistics) {
  std::vector<std::string> vals;
  for (int i = 1; i <= 25; ++i) vals.push_back(std::to_string(i));
  vals.push_back("");
  auto t = single_column(vals);
  auto s = infer_schema(t);
  auto m = encode(t, s);
  auto cats = categorical_view(m);
  const double sd = std::sqrt(52.0);
  for (int i = 1; i <= 25; ++i) {
    double z = (i - 13.0) / sd;
    std::size_t expect = z < -1.4 ? 0 : z < -0.7 ? 1 : z <= 0.7 ? 2 : z <= 1.4 ? 3 : 4;
    EXPECT_EQ(cats.at(static_cast<std::size_t>(i - 1), 0), static_cast<int>(expect)) << i;
  }
  EXPECT_EQ(cats.at(25, 0), 5);
}

TEST(Encode, ZeroSpreadMapsToNormal) {
  VariableSpec v;
  v.name = "q";
  v.kind = VariableKind::numeric;
  v.categories.assign(std::begin(kNumericBins), std::end(kNumericBins));
  v.has_missing = true;
  v.mean = 3.0;
  v.stddev = 0.0;
  SurveySchema s{{v}};
  auto m = encode(single_column({"3", "100", "-7"}), s);
  auto cats = categorical_view(m);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(cats.at(r, 0), 2);
}

TEST(Encode, UnseenCategoryGoesToMissingOrFails) {
  auto with_missing = infer_schema(single_column({"a", "", "b"}));
  auto m = encode(single_column({"c"}), with_missing);
  EXPECT_EQ(categorical_view(m).at(0, 0), 2);
  auto without = infer_schema(single_column({"a", "b"}));
  EXPECT_THROW(encode(single_column({"c"}), without), Error);
}

TEST(Encode, EveryBlockHasExactlyOneBit) {
  synth::SyntheticSpec spec;
  spec.n_attentive = 80;
  spec.n_inattentive = 20;
  spec.n_variables = 6;
  spec.categories = {2, 3, 4, 5, 3, 2};
  auto enc = fixtures::encode_survey(synth::generate(spec));
  for (std::size_t r = 0; r < enc.data.rows; ++r)
    for (const auto& b : enc.data.blocks) {
      int sum = 0;
      for (std::size_t f = b.begin; f < b.end; ++f) sum += enc.data.at(r, f);
      EXPECT_EQ(sum, 1);
    }
}

TEST(CategoricalView, IndexOfSetBit) {
  auto m = fixtures::one_hot_rows({{1}, {2}}, {3});
  auto c = categorical_view(m);
  EXPECT_EQ(c.at(0, 0), 1);
  EXPECT_EQ(c.at(1, 0), 2);
}

TEST(CategoricalView, RoundTripsWithOneHot) {
  Rng rng(11);
  std::vector<int> card = {2, 5, 3, 4};
  std::vector<std::vector<int>> rows;
  for (int r = 0; r < 50; ++r) {
    std::vector<int> row;
    for (int k : card) row.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    rows.push_back(row);
  }
  auto m = fixtures::one_hot_rows(rows, card);
  auto c = categorical_view(m);
  auto back = one_hot(c, m.blocks, m.respondent_ids);
  EXPECT_EQ(back.bits, m.bits);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t v = 0; v < card.size(); ++v) EXPECT_EQ(c.at(r, v), rows[r][v]);
}

TEST(Encode, InferredSchemaAlwaysEncodesItsTable) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::SyntheticSpec spec;
    spec.n_attentive = 40;
    spec.n_inattentive = 10;
    spec.seed = seed;
    auto s = synth::generate(spec);
    EXPECT_NO_THROW(fixtures::encode_survey(s));
  }
}

TEST(SchemaJson, RoundTripKeepsFingerprint) {
  auto t = fixtures::toy_table();
  std::vector<std::string> nums;
  for (int i = 0; i < 10; ++i) nums.push_back(std::to_string(i * 1.5));
  t.columns.push_back("score");
  for (std::size_t r = 0; r < t.rows.size(); ++r) t.rows[r].push_back(nums[r]);
  IngestOptions opts;
  opts.distinct_threshold = 5;
  auto s = infer_schema(t, opts);
  auto back = schema_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(back.fingerprint(), s.fingerprint());
  EXPECT_EQ(back.variables.back().mean, s.variables.back().mean);
  EXPECT_EQ(back.variables.back().stddev, s.variables.back().stddev);
}

TEST(EncodedCsv, HeaderNamesVariableAndCategory) {
  auto t = single_column({"a", "", "b"}, "colour");
  auto s = infer_schema(t);
  auto out = encoded_csv(encode(t, s), s);
  EXPECT_EQ(out.substr(0, out.find('\n')), "respondent_id,colour=a,colour=b,colour=Missing");
}

TEST(Csv, QuotedFieldsAndArity) {
  auto t = csv::parse("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_THROW(csv::parse("a,b\n1\n"), Error);
}

TEST(Ids, DefaultIdColumnIsUsedWhenPresent) {
  RawTable t;
  t.columns = {"respondent_id", "q"};
  t.rows = {{"r7", "a"}, {"r9", "b"}};
  auto s = infer_schema(t);
  ASSERT_EQ(s.variables.size(), 1u);
  auto m = encode(t, s);
  EXPECT_EQ(m.respondent_ids, (std::vector<std::string>{"r7", "r9"}));
}
