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

// Reconstruction metrics (accuracy, baseline, lift, one-vs-all AUC),
// ranking metrics against attention-check labels, and the screening cost
// model.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surveyqc/common.hpp"
#include "surveyqc/csv.hpp"
#include "surveyqc/survey_data.hpp"

namespace surveyqc::eval {

// Dense N x d matrix of reconstructed feature scores, row-major.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Area under the ROC curve by the rank statistic. Tied scores count as half
// a concordant pair. Throws when either class is empty.
inline double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw data_error("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (positive[idx[t]]) {
        rank_sum += mid_rank;
        pos += 1.0;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw data_error("roc_auc needs both positive and negative labels");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// ---------------------------------------------------------------------------
// Reconstruction quality

struct ReconstructionReport {
  std::vector<double> accuracy;  // per variable
  std::vector<double> baseline;  // per variable, majority-class frequency
  std::vector<double> ora;       // per variable; NaN when every category was degenerate
  double mean_accuracy = 0.0;
  double mean_baseline = 0.0;
  double lift = 0.0;
  double mean_ora = 0.0;
};

namespace detail {

inline void check_shapes(const EncodedMatrix& data, const ScoreMatrix& rec) {
  if (rec.rows != data.rows || rec.cols != data.cols)
    throw data_error("reconstruction shape does not match the encoded data");
}

inline std::size_t true_category(const EncodedMatrix& data, std::size_t r, const Block& b) {
  for (std::size_t k = 0; k < b.size(); ++k)
    if (data.at(r, b.begin + k)) return k;
  return b.size();
}

}  // namespace detail

// Per-variable fraction of rows whose block argmax matches the true
// category. Argmax ties go to the lowest feature index.
inline std::vector<double> variable_accuracy(const EncodedMatrix& data, const ScoreMatrix& rec) {
  detail::check_shapes(data, rec);
  std::vector<double> acc(data.blocks.size(), 0.0);
  if (data.rows == 0) return acc;
  for (std::size_t v = 0; v < data.blocks.size(); ++v) {
    const Block& b = data.blocks[v];
    std::size_t hits = 0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < b.size(); ++k)
        if (rec.at(r, b.begin + k) > rec.at(r, b.begin + arg)) arg = k;
      if (arg == detail::true_category(data, r, b)) ++hits;
    }
    acc[v] = static_cast<double>(hits) / static_cast<double>(data.rows);
  }
  return acc;
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Majority-class frequency of every variable.
inline std::vector<double> baseline_accuracy(const EncodedMatrix& data) {
  std::vector<double> base(data.blocks.size(), 0.0);
  if (data.rows == 0) return base;
  for (std::size_t v = 0; v < data.blocks.size(); ++v) {
    const Block& b = data.blocks[v];
    std::size_t best = 0;
    for (std::size_t k = 0; k < b.size(); ++k) {
      std::size_t count = 0;
      for (std::size_t r = 0; r < data.rows; ++r) count += data.at(r, b.begin + k);
      best = std::max(best, count);
    }
    base[v] = static_cast<double>(best) / static_cast<double>(data.rows);
  }
  return base;
}

// Mean over variables of accuracy / baseline.
inline double lift(std::span<const double> accuracy, std::span<const double> baseline) {
  if (accuracy.size() != baseline.size()) throw data_error("lift: size mismatch");
  if (accuracy.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t v = 0; v < accuracy.size(); ++v) sum += accuracy[v] / baseline[v];
  return sum / static_cast<double>(accuracy.size());
}

// One-vs-all AUC per variable. Categories with no positives or no negatives
// are skipped; a variable with only degenerate categories gets NaN and is
// left out of the mean.
inline std::vector<double> ora_per_variable(const EncodedMatrix& data, const ScoreMatrix& rec) {
  detail::check_shapes(data, rec);
  std::vector<double> out(data.blocks.size(), std::nan(""));
  std::vector<double> scores(data.rows);
  std::vector<bool> labels(data.rows);
  for (std::size_t v = 0; v < data.blocks.size(); ++v) {
    const Block& b = data.blocks[v];
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < b.size(); ++k) {
      std::size_t pos = 0;
      for (std::size_t r = 0; r < data.rows; ++r) {
        scores[r] = rec.at(r, b.begin + k);
        labels[r] = data.at(r, b.begin + k) != 0;
        pos += labels[r];
      }
      if (pos == 0 || pos == data.rows) continue;
      sum += roc_auc(scores, labels);
      ++used;
    }
    if (used > 0) out[v] = sum / static_cast<double>(used);
    else warn("variable " + std::to_string(v) + " has no non-degenerate category; excluded from ORA");
  }
  return out;
}

inline double mean_ignoring_nan(std::span<const double> xs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : xs)
    if (!std::isnan(x)) {
      sum += x;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

inline double ora(const EncodedMatrix& data, const ScoreMatrix& rec) {
  auto per = ora_per_variable(data, rec);
  return mean_ignoring_nan(per);
}

inline ReconstructionReport reconstruction_report(const EncodedMatrix& data, const ScoreMatrix& rec) {
  ReconstructionReport rep;
  rep.accuracy = variable_accuracy(data, rec);
  rep.baseline = baseline_accuracy(data);
  rep.ora = ora_per_variable(data, rec);
  rep.mean_accuracy = mean(rep.accuracy);
  rep.mean_baseline = mean(rep.baseline);
  rep.lift = lift(rep.accuracy, rep.baseline);
  rep.mean_ora = mean_ignoring_nan(rep.ora);
  return rep;
}

// ---------------------------------------------------------------------------
// Detection quality

struct DetectionReport {
  std::size_t n = 0;
  std::size_t h = 0;  // number of positives
  double recall_at_h = 0.0;
  double ndcg_at_h = 0.0;
  double auc = 0.0;
  std::map<std::size_t, double> precision_at_k;
};

inline const std::vector<std::size_t>& default_ks() {
  static const std::vector<std::size_t> ks = {10, 50, 100};
  return ks;
}

// Respondent indices ordered most-anomalous first; equal scores keep
// ascending index order.
inline std::vector<std::size_t> anomaly_ranking(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

// Discounted cumulative gain of the first `h` ranks.
inline double dcg_at(std::span<const std::size_t> order, const std::vector<bool>& positive, std::size_t h) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < h && i < order.size(); ++i)
    if (positive[order[i]]) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg;
}

// Scores are anomaly scores: higher means more likely inattentive.
inline DetectionReport detection_metrics(std::span<const double> scores, const std::vector<bool>& positive,
                                         std::span<const std::size_t> ks = default_ks()) {
  if (scores.size() != positive.size()) throw data_error("detection_metrics: size mismatch");
  DetectionReport rep;
  rep.n = scores.size();
  rep.h = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (rep.h == 0) throw data_error("detection metrics are undefined without positive labels");

  const auto order = anomaly_ranking(scores);
  auto hits_in_top = [&](std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k && i < order.size(); ++i) hits += positive[order[i]];
    return hits;
  };
  rep.recall_at_h = static_cast<double>(hits_in_top(rep.h)) / static_cast<double>(rep.h);
  for (std::size_t k : ks) {
    if (k == 0) throw config_error("precision cutoff k must be positive");
    std::size_t kk = k;
    if (kk > rep.n) {
      warn("precision cutoff " + std::to_string(k) + " exceeds respondent count; clamped to " +
           std::to_string(rep.n));
      kk = rep.n;
    }
    rep.precision_at_k[k] = static_cast<double>(hits_in_top(kk)) / static_cast<double>(kk);
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < rep.h; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  rep.ndcg_at_h = dcg_at(order, positive, rep.h) / idcg;
  rep.auc = roc_auc(scores, positive);
  return rep;
}

// ---------------------------------------------------------------------------
// Attention-check labels

struct AttentionLabels {
  std::vector<std::string> checks;
  std::size_t rows = 0;
  std::vector<char> failed;  // rows x checks, row-major

  bool at(std::size_t r, std::size_t c) const { return failed[r * checks.size() + c] != 0; }
};

enum class LabelMode { single, union_of, intersection };

struct LabelSelector {
  LabelMode mode = LabelMode::union_of;
  std::size_t check = 0;  // used by LabelMode::single
};

inline std::vector<bool> derive_labels(const AttentionLabels& labels, const LabelSelector& sel) {
  const std::size_t c = labels.checks.size();
  if (c == 0) throw config_error("no attention checks configured");
  if (sel.mode == LabelMode::single && sel.check >= c)
    throw config_error("attention check index " + std::to_string(sel.check) + " out of range");
  std::vector<bool> out(labels.rows, false);
  for (std::size_t r = 0; r < labels.rows; ++r) {
    switch (sel.mode) {
      case LabelMode::single: out[r] = labels.at(r, sel.check); break;
      case LabelMode::union_of: {
        bool any = false;
        for (std::size_t j = 0; j < c; ++j) any = any || labels.at(r, j);
        out[r] = any;
        break;
      }
      case LabelMode::intersection: {
        bool all = true;
        for (std::size_t j = 0; j < c; ++j) all = all && labels.at(r, j);
        out[r] = all;
        break;
      }
    }
  }
  return out;
}

// Reads attention-check columns from a raw table. A respondent fails a check
// when the cell is not one of that check's pass values.
inline AttentionLabels read_attention_labels(const RawTable& table, const std::vector<std::string>& columns,
                                             const std::vector<std::vector<std::string>>& pass_values) {
  if (pass_values.size() != columns.size() && pass_values.size() != 1)
    throw config_error("need one pass-value list per label column (or a single shared list)");
  AttentionLabels out;
  out.checks = columns;
  out.rows = table.num_rows();
  out.failed.assign(out.rows * columns.size(), 0);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::size_t col = table.column_index(columns[c]);
    if (col == RawTable::npos) throw config_error("label column '" + columns[c] + "' not found");
    const auto& pass = pass_values.size() == 1 ? pass_values[0] : pass_values[c];
    for (std::size_t r = 0; r < out.rows; ++r) {
      std::string cell = surveyqc::detail::trim(table.rows[r][col]);
      bool passed = std::find(pass.begin(), pass.end(), cell) != pass.end();
      out.failed[r * columns.size() + c] = passed ? 0 : 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Screening cost model

struct CostParams {
  double n_respondents = 0.0;
  double c_tax = 0.0;
  double c_noise = 0.0;
  double c_discard = 0.0;
  double contamination_rate = 0.0;
  double fnr = 0.0;
  double fpr = 0.0;
  double c_compute = 0.0;
};

enum class Recommendation { attention_checks, unsupervised_model };

struct CostOutcome {
  double attention_check_cost = 0.0;  // N * c_tax
  double per_respondent_model_cost = 0.0;
  double unsupervised_cost = 0.0;     // c_compute + N * per_respondent_model_cost
  Recommendation recommendation = Recommendation::attention_checks;
};

inline CostOutcome screening_cost(const CostParams& p) {
  auto rate = [](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) throw config_error(std::string(name) + " must lie in [0, 1]");
  };
  rate(p.contamination_rate, "contamination rate");
  rate(p.fnr, "FNR");
  rate(p.fpr, "FPR");
  for (double c : {p.n_respondents, p.c_tax, p.c_noise, p.c_discard, p.c_compute})
    if (!(c >= 0.0)) throw config_error("costs and respondent count must be non-negative");

  CostOutcome out;
  out.attention_check_cost = p.n_respondents * p.c_tax;
  out.per_respondent_model_cost =
      p.contamination_rate * p.fnr * p.c_noise + (1.0 - p.contamination_rate) * p.fpr * p.c_discard;
  // N is distributed over the two error terms so that integer-scaled inputs
  // stay exact.
  const double n = p.n_respondents;
  out.unsupervised_cost = p.c_compute + (n * p.contamination_rate * p.fnr * p.c_noise +
                                         n * (1.0 - p.contamination_rate) * p.fpr * p.c_discard);
  out.recommendation = out.unsupervised_cost < out.attention_check_cost ? Recommendation::unsupervised_model
                                                                        : Recommendation::attention_checks;
  return out;
}

inline std::string to_string(Recommendation r) {
  return r == Recommendation::unsupervised_model ? "unsupervised_model" : "attention_checks";
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::ordered_json to_json(const DetectionReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["h"] = r.h;
  j["recall_at_h"] = r.recall_at_h;
  for (const auto& [k, v] : r.precision_at_k) j["precision_at_" + std::to_string(k)] = v;
  j["ndcg_at_h"] = r.ndcg_at_h;
  j["auc"] = r.auc;
  return j;
}

inline std::string detection_csv(const DetectionReport& r) {
  std::string header = "h,R@h";
  std::string row = std::to_string(r.h) + "," + csv::fixed(r.recall_at_h);
  for (const auto& [k, v] : r.precision_at_k) {
    header += ",P@" + std::to_string(k);
    row += "," + csv::fixed(v);
  }
  header += ",NDCG@h,AUC\n";
  row += "," + csv::fixed(r.ndcg_at_h) + "," + csv::fixed(r.auc) + "\n";
  return header + row;
}

inline nlohmann::ordered_json to_json(const ReconstructionReport& r, const SurveySchema* schema = nullptr) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.mean_accuracy;
  j["baseline_accuracy"] = r.mean_baseline;
  j["lift"] = r.lift;
  j["ora"] = r.mean_ora;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < r.accuracy.size(); ++v) {
    nlohmann::ordered_json e;
    e["variable"] = schema ? schema->variables[v].name : std::to_string(v);
    e["accuracy"] = r.accuracy[v];
    e["baseline_accuracy"] = r.baseline[v];
    if (std::isnan(r.ora[v])) e["ora"] = nullptr;
    else e["ora"] = r.ora[v];
    per.push_back(std::move(e));
  }
  j["variables"] = std::move(per);
  return j;
}

inline std::string reconstruction_csv(const ReconstructionReport& r) {
  return "Accuracy,Baseline Acc,Lift,ORA\n" + csv::fixed(r.mean_accuracy) + "," + csv::fixed(r.mean_baseline) +
         "," + csv::fixed(r.lift) + "," + csv::fixed(r.mean_ora) + "\n";
}

}  // namespace surveyqc::eval
