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

// End-to-end orchestration: ingest -> encode -> fit -> score -> rank ->
// evaluate -> report, and the percentile trade-off sweep.
//
// Every stage builds its outputs in memory as named artifacts; nothing is
// written until the whole run has succeeded.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surveyqc/autoencoder.hpp"
#include "surveyqc/chowliu.hpp"
#include "surveyqc/common.hpp"
#include "surveyqc/config.hpp"
#include "surveyqc/csv.hpp"
#include "surveyqc/evaluation.hpp"
#include "surveyqc/random.hpp"
#include "surveyqc/survey_data.hpp"

namespace surveyqc::pipeline {

enum class ScorerKind { chowliu, linear_ae, ae };

inline std::string to_string(ScorerKind s) {
  switch (s) {
    case ScorerKind::chowliu: return "chowliu";
    case ScorerKind::linear_ae: return "linear-ae";
    case ScorerKind::ae: return "ae";
  }
  return "chowliu";
}

inline ScorerKind scorer_from_string(const std::string& s) {
  if (s == "chowliu") return ScorerKind::chowliu;
  if (s == "linear-ae" || s == "linear_ae") return ScorerKind::linear_ae;
  if (s == "ae") return ScorerKind::ae;
  throw config_error("unknown scorer '" + s + "' (expected chowliu, linear-ae or ae)");
}

inline eval::LabelMode label_mode_from_string(const std::string& s) {
  if (s == "single") return eval::LabelMode::single;
  if (s == "union") return eval::LabelMode::union_of;
  if (s == "intersection") return eval::LabelMode::intersection;
  throw config_error("unknown label mode '" + s + "' (expected single, union or intersection)");
}

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path schema_path;  // empty: infer from the input
  std::filesystem::path output_dir = "surveyqc-out";
  IngestOptions ingest;

  ScorerKind scorer = ScorerKind::chowliu;
  double alpha = 1.0;
  std::string root_variable;  // empty: MI-central root

  ae::AEConfig ae = ae::AEConfig::small();
  int linear_latent_dim = 8;
  double linear_learning_rate = 1e-2;
  bool tune = false;
  int tune_trials = 30;
  ae::SearchSpace search_space;

  std::vector<std::string> label_columns;
  std::vector<std::string> pass_values = {"pass"};
  eval::LabelSelector labels;
  std::vector<std::size_t> precision_ks = {10, 50, 100};

  int cv_folds = 0;  // 0: no out-of-sample confirmation

  std::uint64_t seed = 0;
  std::vector<double> sweep_percentiles = {80, 85, 90, 95, 100};

  // Autoencoder settings for the configured scorer, seeded from `seed`.
  ae::AEConfig autoencoder_config() const {
    ae::AEConfig c = ae;
    c.seed = seed;
    if (scorer == ScorerKind::linear_ae) {
      c.linear_mode = true;
      c.encoder.clear();
      c.decoder.clear();
      c.latent_activation = ae::Activation::identity;
      c.latent_dim = linear_latent_dim;
      c.learning_rate = linear_learning_rate;
    }
    return c;
  }

  void validate() const {
    if (input.empty()) throw config_error("no input file configured");
    if (!(alpha > 0.0)) throw config_error("alpha must be positive");
    for (double p : sweep_percentiles)
      if (!(p > 0.0 && p <= 100.0)) throw config_error("sweep percentiles must lie in (0, 100]");
    if (tune_trials < 1) throw config_error("tune trials must be positive");
    if (cv_folds != 0 && cv_folds < 2) throw config_error("cross-validation needs at least two folds");
  }
};

// Applies a key/value document on top of `cfg`. Unknown keys are rejected.
inline void apply(const KeyValueConfig& kv, PipelineConfig& cfg) {
  static const std::vector<std::string> known = {
      "input.path", "input.schema", "input.id_column", "input.missing_markers", "input.distinct_threshold",
      "output.dir", "run.seed", "scorer.kind", "scorer.alpha", "scorer.root",
      "autoencoder.percentile", "autoencoder.latent_dim", "autoencoder.latent_activation",
      "autoencoder.encoder_layers", "autoencoder.decoder_layers", "autoencoder.units", "autoencoder.activation",
      "autoencoder.l2", "autoencoder.dropout", "autoencoder.batch_norm", "autoencoder.learning_rate",
      "autoencoder.batch_size", "autoencoder.max_epochs", "autoencoder.patience",
      "autoencoder.validation_fraction", "autoencoder.tune", "autoencoder.tune_trials",
      "linear.latent_dim", "linear.learning_rate", "labels.columns", "labels.pass_values", "labels.mode",
      "labels.check", "labels.precision_k", "evaluation.cv_folds", "sweep.percentiles"};
  for (const auto& k : kv.keys())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw config_error("unknown config key '" + k + "'");

  if (auto v = kv.get_string("input.path")) cfg.input = *v;
  if (auto v = kv.get_string("input.schema")) cfg.schema_path = *v;
  if (auto v = kv.get_string("input.id_column")) {
    cfg.ingest.id_column = *v;
    cfg.ingest.require_id_column = !v->empty();
  }
  if (auto v = kv.get_list("input.missing_markers")) cfg.ingest.missing_markers = *v;
  if (auto v = kv.get_int("input.distinct_threshold")) {
    if (*v < 1) throw config_error("distinct_threshold must be positive");
    cfg.ingest.distinct_threshold = static_cast<std::size_t>(*v);
  }
  if (auto v = kv.get_string("output.dir")) cfg.output_dir = *v;
  if (auto v = kv.get_int("run.seed")) cfg.seed = static_cast<std::uint64_t>(*v);
  if (auto v = kv.get_string("scorer.kind")) cfg.scorer = scorer_from_string(*v);
  if (auto v = kv.get_double("scorer.alpha")) cfg.alpha = *v;
  if (auto v = kv.get_string("scorer.root")) cfg.root_variable = *v;

  ae::AEConfig& a = cfg.ae;
  if (auto v = kv.get_double("autoencoder.percentile")) a.percentile = *v;
  if (auto v = kv.get_int("autoencoder.latent_dim")) a.latent_dim = static_cast<int>(*v);
  if (auto v = kv.get_string("autoencoder.latent_activation")) a.latent_activation = ae::activation_from_string(*v);
  ae::LayerSpec layer = a.encoder.empty() ? ae::LayerSpec{} : a.encoder.front();
  if (auto v = kv.get_int("autoencoder.units")) layer.units = static_cast<int>(*v);
  if (auto v = kv.get_string("autoencoder.activation")) layer.activation = ae::activation_from_string(*v);
  if (auto v = kv.get_double("autoencoder.l2")) layer.l2 = *v;
  if (auto v = kv.get_double("autoencoder.dropout")) layer.dropout = *v;
  if (auto v = kv.get_bool("autoencoder.batch_norm")) layer.batch_norm = *v;
  auto enc = kv.get_int("autoencoder.encoder_layers").value_or(static_cast<std::int64_t>(a.encoder.size()));
  auto dec = kv.get_int("autoencoder.decoder_layers").value_or(static_cast<std::int64_t>(a.decoder.size()));
  if (enc < 0 || dec < 0) throw config_error("layer counts must be non-negative");
  a.encoder.assign(static_cast<std::size_t>(enc), layer);
  a.decoder.assign(static_cast<std::size_t>(dec), layer);
  a.latent_l2 = a.output_l2 = layer.l2;
  if (auto v = kv.get_double("autoencoder.learning_rate")) a.learning_rate = *v;
  if (auto v = kv.get_int("autoencoder.batch_size")) a.batch_size = static_cast<int>(*v);
  if (auto v = kv.get_int("autoencoder.max_epochs")) a.max_epochs = static_cast<int>(*v);
  if (auto v = kv.get_int("autoencoder.patience")) a.early_stop_patience = static_cast<int>(*v);
  if (auto v = kv.get_double("autoencoder.validation_fraction")) a.validation_fraction = *v;
  if (auto v = kv.get_bool("autoencoder.tune")) cfg.tune = *v;
  if (auto v = kv.get_int("autoencoder.tune_trials")) cfg.tune_trials = static_cast<int>(*v);
  if (auto v = kv.get_int("linear.latent_dim")) cfg.linear_latent_dim = static_cast<int>(*v);
  if (auto v = kv.get_double("linear.learning_rate")) cfg.linear_learning_rate = *v;

  if (auto v = kv.get_list("labels.columns")) cfg.label_columns = *v;
  if (auto v = kv.get_list("labels.pass_values")) cfg.pass_values = *v;
  if (auto v = kv.get_string("labels.mode")) cfg.labels.mode = label_mode_from_string(*v);
  if (auto v = kv.get_int("labels.check")) cfg.labels.check = static_cast<std::size_t>(*v);
  if (auto v = kv.get_number_list("labels.precision_k")) {
    cfg.precision_ks.clear();
    for (double k : *v) {
      if (k < 1 || k != std::floor(k)) throw config_error("precision_k entries must be positive integers");
      cfg.precision_ks.push_back(static_cast<std::size_t>(k));
    }
  }
  if (auto v = kv.get_int("evaluation.cv_folds")) cfg.cv_folds = static_cast<int>(*v);
  if (auto v = kv.get_number_list("sweep.percentiles")) cfg.sweep_percentiles = *v;
}

// ---------------------------------------------------------------------------
// Artifacts

// Output files by name, written together once a command has succeeded.
using Artifacts = std::map<std::string, std::string>;

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline void write_artifacts(const std::filesystem::path& dir, const Artifacts& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, content] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write '" + (dir / name).string() + "'");
    out << content;
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stages

struct Prepared {
  RawTable table;
  SurveySchema schema;
  EncodedMatrix encoded;
};

inline IngestOptions ingest_options(const PipelineConfig& cfg) {
  IngestOptions opts = cfg.ingest;
  for (const auto& c : cfg.label_columns) opts.excluded_columns.push_back(c);
  return opts;
}

// Loads the input, resolves the schema (stored or inferred; label columns
// never become variables) and encodes it.
inline Prepared prepare(const PipelineConfig& cfg) {
  Prepared p;
  p.table = csv::read_file(cfg.input);
  const IngestOptions opts = ingest_options(cfg);
  for (const auto& c : cfg.label_columns)
    if (p.table.column_index(c) == RawTable::npos) throw config_error("label column '" + c + "' not found in input");
  p.schema = cfg.schema_path.empty() ? infer_schema(p.table, opts) : schema_from_json(read_json(cfg.schema_path));
  for (const auto& c : cfg.label_columns)
    if (p.schema.find(c)) throw config_error("label column '" + c + "' is part of the schema");
  p.encoded = encode(p.table, p.schema, opts);
  return p;
}

struct FittedModel {
  ScorerKind kind = ScorerKind::chowliu;
  std::optional<chowliu::ChowLiuModel> tree;
  std::optional<ae::AEModel> autoencoder;
  std::optional<ae::TrainReport> train_report;
  std::optional<ae::TuneResult> tuning;
  std::string schema_fingerprint;
  SurveySchema schema;
};

inline std::optional<std::size_t> root_index(const PipelineConfig& cfg, const SurveySchema& schema) {
  if (cfg.root_variable.empty()) return std::nullopt;
  for (std::size_t v = 0; v < schema.variables.size(); ++v)
    if (schema.variables[v].name == cfg.root_variable) return v;
  throw config_error("root variable '" + cfg.root_variable + "' is not in the schema");
}

inline ae::AEConfig resolve_autoencoder_config(const PipelineConfig& cfg, const EncodedMatrix& encoded,
                                               std::optional<ae::TuneResult>* tuning = nullptr) {
  ae::AEConfig c = cfg.autoencoder_config();
  if (cfg.scorer == ScorerKind::ae && cfg.tune) {
    auto result = ae::tune(encoded, c, cfg.search_space, cfg.tune_trials, cfg.seed);
    c = result.best;
    if (tuning) *tuning = std::move(result);
  }
  return c;
}

inline FittedModel fit(const PipelineConfig& cfg, const Prepared& data) {
  FittedModel m;
  m.kind = cfg.scorer;
  m.schema_fingerprint = data.schema.fingerprint();
  m.schema = data.schema;
  if (cfg.scorer == ScorerKind::chowliu) {
    chowliu::FitOptions opts;
    opts.alpha = cfg.alpha;
    opts.root = root_index(cfg, data.schema);
    m.tree = chowliu::fit(categorical_view(data.encoded), opts, m.schema_fingerprint);
    return m;
  }
  ae::AEConfig c = resolve_autoencoder_config(cfg, data.encoded, &m.tuning);
  auto trained = ae::train(data.encoded, c);
  m.autoencoder = std::move(trained.model);
  m.train_report = std::move(trained.report);
  return m;
}

inline nlohmann::ordered_json to_json(const FittedModel& m) {
  nlohmann::ordered_json doc;
  doc["scorer"] = to_string(m.kind);
  doc["schema_fingerprint"] = m.schema_fingerprint;
  doc["schema"] = to_json(m.schema);
  if (m.tree) doc["model"] = chowliu::to_json(*m.tree);
  if (m.autoencoder) doc["model"] = ae::to_json(*m.autoencoder);
  return doc;
}

inline FittedModel model_from_json(const nlohmann::json& doc) {
  FittedModel m;
  try {
    m.kind = scorer_from_string(doc.at("scorer").get<std::string>());
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    m.schema = schema_from_json(doc.at("schema"));
    if (m.schema.fingerprint() != m.schema_fingerprint) throw data_error("model file schema does not match its fingerprint");
    if (m.kind == ScorerKind::chowliu) m.tree = chowliu::chowliu_from_json(doc.at("model"));
    else m.autoencoder = ae::autoencoder_from_json(doc.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed model file: ") + e.what());
  }
  return m;
}

struct Scores {
  std::vector<double> anomaly;  // higher = more atypical
  std::vector<double> log_likelihood;  // Chow-Liu only
  std::optional<eval::ScoreMatrix> reconstruction;  // autoencoders only
};

inline Scores score(const FittedModel& m, const EncodedMatrix& encoded, const SurveySchema& schema) {
  if (m.schema_fingerprint != schema.fingerprint())
    throw data_error("model was fitted against a different schema");
  Scores s;
  if (m.tree) {
    s.log_likelihood = chowliu::log_likelihoods(*m.tree, categorical_view(encoded));
    for (double ll : s.log_likelihood) s.anomaly.push_back(-ll);
  } else {
    s.anomaly = ae::reconstruction_errors(*m.autoencoder, encoded);
    s.reconstruction = ae::reconstruct(*m.autoencoder, encoded);
  }
  for (double x : s.anomaly)
    if (!std::isfinite(x)) throw numeric_error("non-finite respondent score");
  return s;
}

// respondent_id, score, rank (1 = most atypical), typicality_pct and, for
// Chow-Liu, the log-likelihood. Full precision so reruns compare bytewise.
inline std::string scores_csv(const std::vector<std::string>& ids, const Scores& s) {
  const std::size_t n = s.anomaly.size();
  const auto order = eval::anomaly_ranking(s.anomaly);
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i + 1;
  std::vector<double> pct(n, 1.0);
  if (n >= 2) {
    std::vector<double> typicality(n);
    for (std::size_t i = 0; i < n; ++i) typicality[i] = -s.anomaly[i];
    pct = chowliu::typicality_percentile(typicality);
  }
  std::string out = "respondent_id,score,rank,typicality_pct";
  if (!s.log_likelihood.empty()) out += ",log_likelihood";
  out += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += csv::escape(ids[i]) + "," + csv::exact(s.anomaly[i]) + "," + std::to_string(rank[i]) + "," +
           csv::exact(pct[i]);
    if (!s.log_likelihood.empty()) out += "," + csv::exact(s.log_likelihood[i]);
    out += "\n";
  }
  return out;
}

// Attention-check labels for the configured columns; nullopt when none are
// configured or when no respondent is positive (detection is then skipped).
inline std::optional<std::vector<bool>> labels_for(const PipelineConfig& cfg, const RawTable& table) {
  if (cfg.label_columns.empty()) return std::nullopt;
  auto att = eval::read_attention_labels(table, cfg.label_columns, {cfg.pass_values});
  auto labels = eval::derive_labels(att, cfg.labels);
  if (std::find(labels.begin(), labels.end(), true) == labels.end()) {
    warn("no respondent failed the configured attention checks; detection metrics skipped");
    return std::nullopt;
  }
  if (std::find(labels.begin(), labels.end(), false) == labels.end()) {
    warn("every respondent failed the configured attention checks; detection metrics skipped");
    return std::nullopt;
  }
  return labels;
}

inline void add_detection(Artifacts& files, const eval::DetectionReport& rep) {
  files["detection_report.json"] = dump(eval::to_json(rep));
  files["detection_report.csv"] = eval::detection_csv(rep);
}

inline void add_reconstruction(Artifacts& files, const eval::ReconstructionReport& rep, const SurveySchema& schema) {
  files["reconstruction_report.json"] = dump(eval::to_json(rep, &schema));
  files["reconstruction_report.csv"] = eval::reconstruction_csv(rep);
}

inline nlohmann::ordered_json to_json(const ae::TrainReport& r) {
  nlohmann::ordered_json j;
  j["train_loss"] = r.train_loss;
  j["validation_loss"] = r.validation_loss;
  j["best_epoch"] = r.best_epoch;
  j["stopped_epoch"] = r.stopped_epoch;
  return j;
}

// Full pipeline for one configuration.
inline EncodedMatrix subset_rows(const EncodedMatrix& m, std::span<const std::size_t> rows) {
  EncodedMatrix out;
  out.rows = rows.size();
  out.cols = m.cols;
  out.blocks = m.blocks;
  out.bits.reserve(rows.size() * m.cols);
  for (auto r : rows) {
    auto row = m.row(r);
    out.bits.insert(out.bits.end(), row.begin(), row.end());
    out.respondent_ids.push_back(m.respondent_ids[r]);
  }
  return out;
}

struct CrossValidation {
  int folds = 0;
  std::vector<std::optional<double>> fold_auc;  // empty when a fold lacks a class
  double mean_fold_auc = 0.0;
  double pooled_auc = 0.0;  // AUC of all out-of-fold scores together
};

// K-fold out-of-sample AUC: each fold is scored by a model fitted on the
// others. Folds come from a seeded shuffle of the respondents.
inline CrossValidation cross_validate(const PipelineConfig& cfg, const Prepared& data, const std::vector<bool>& labels) {
  const std::size_t n = data.encoded.rows;
  const auto k = static_cast<std::size_t>(cfg.cv_folds);
  if (n < 2 * k) throw data_error("too few respondents for " + std::to_string(k) + "-fold cross-validation");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, 40));
  rng.shuffle(order);

  CrossValidation cv;
  cv.folds = cfg.cv_folds;
  std::vector<double> pooled(n, 0.0);
  double total = 0.0;
  int scored = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i) (i % k == f ? test_rows : train_rows).push_back(order[i]);
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    Prepared train{data.table, data.schema, subset_rows(data.encoded, train_rows)};
    PipelineConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, 41 + f);
    FittedModel model = fit(fold_cfg, train);
    Scores s = score(model, subset_rows(data.encoded, test_rows), data.schema);
    std::vector<bool> y;
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      pooled[test_rows[i]] = s.anomaly[i];
      y.push_back(labels[test_rows[i]]);
    }
    const auto pos = std::count(y.begin(), y.end(), true);
    if (pos == 0 || pos == static_cast<long>(y.size())) {
      cv.fold_auc.emplace_back();
      warn("fold " + std::to_string(f + 1) + " has a single class; its AUC is skipped");
      continue;
    }
    const double a = eval::roc_auc(s.anomaly, y);
    cv.fold_auc.emplace_back(a);
    total += a;
    ++scored;
  }
  if (scored == 0) throw data_error("no cross-validation fold contains both classes");
  cv.mean_fold_auc = total / scored;
  cv.pooled_auc = eval::roc_auc(pooled, labels);
  return cv;
}

inline nlohmann::ordered_json to_json(const CrossValidation& cv) {
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& a : cv.fold_auc) folds.push_back(a ? nlohmann::ordered_json(*a) : nlohmann::ordered_json());
  return {{"folds", cv.folds}, {"fold_auc", folds}, {"mean_fold_auc", cv.mean_fold_auc}, {"pooled_auc", cv.pooled_auc}};
}

inline Artifacts run(const PipelineConfig& cfg) {
  cfg.validate();
  Prepared data = prepare(cfg);
  auto labels = labels_for(cfg, data.table);
  FittedModel model = fit(cfg, data);
  Scores s = score(model, data.encoded, data.schema);

  Artifacts files;
  files["schema.json"] = dump(to_json(data.schema));
  files["model.json"] = dump(to_json(model));
  files["scores.csv"] = scores_csv(data.encoded.respondent_ids, s);
  if (model.train_report) files["train_report.json"] = dump(to_json(*model.train_report));
  if (model.tuning) {
    nlohmann::ordered_json trials = nlohmann::ordered_json::array();
    for (const auto& t : model.tuning->trials)
      trials.push_back({{"config", ae::to_json(t.config)}, {"validation_loss", t.validation_loss}});
    files["tuning.json"] = dump({{"best", ae::to_json(model.tuning->best)}, {"trials", trials}});
  }
  if (labels) add_detection(files, eval::detection_metrics(s.anomaly, *labels, cfg.precision_ks));
  if (s.reconstruction) add_reconstruction(files, eval::reconstruction_report(data.encoded, *s.reconstruction), data.schema);
  if (cfg.cv_folds > 0) {
    if (!labels) throw config_error("cross-validation needs attention-check labels with both classes");
    files["cv_report.json"] = dump(to_json(cross_validate(cfg, data, *labels)));
  }
  return files;
}

// Scores the configured input with a stored model, reusing the model's schema.
inline Artifacts score_with(const PipelineConfig& cfg, const FittedModel& model) {
  RawTable table = csv::read_file(cfg.input);
  EncodedMatrix encoded = encode(table, model.schema, ingest_options(cfg));
  Scores s = score(model, encoded, model.schema);
  return {{"scores.csv", scores_csv(encoded.respondent_ids, s)}};
}

// Detection (labels required) and, for autoencoders, reconstruction reports.
inline Artifacts evaluate_with(const PipelineConfig& cfg, const FittedModel& model) {
  if (cfg.label_columns.empty() && !model.autoencoder)
    throw config_error("evaluate needs label columns (or an autoencoder model)");
  RawTable table = csv::read_file(cfg.input);
  for (const auto& c : cfg.label_columns)
    if (table.column_index(c) == RawTable::npos) throw config_error("label column '" + c + "' not found in input");
  EncodedMatrix encoded = encode(table, model.schema, ingest_options(cfg));
  Scores s = score(model, encoded, model.schema);
  Artifacts files;
  if (auto labels = labels_for(cfg, table)) add_detection(files, eval::detection_metrics(s.anomaly, *labels, cfg.precision_ks));
  if (s.reconstruction) add_reconstruction(files, eval::reconstruction_report(encoded, *s.reconstruction), model.schema);
  return files;
}

// ---------------------------------------------------------------------------
// Percentile trade-off sweep

struct SweepRow {
  double percentile = 100.0;
  double lift = 0.0;
  double accuracy = 0.0;
  double ora = 0.0;
  std::optional<eval::DetectionReport> detection;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending percentile; 100 always present
  ae::AEConfig architecture;
};

inline const SweepRow& baseline_row(const SweepResult& r) {
  for (const auto& row : r.rows)
    if (row.percentile == 100.0) return row;
  throw config_error("sweep has no p = 100 baseline");
}

// Trains one autoencoder per percentile from the same architecture and
// initialization seed, and evaluates each on the full data.
inline SweepResult sweep(const PipelineConfig& cfg, std::vector<double> percentiles) {
  if (cfg.scorer == ScorerKind::chowliu) throw config_error("sweep needs an autoencoder scorer");
  cfg.validate();
  if (percentiles.empty()) throw config_error("sweep needs at least one percentile");
  for (double p : percentiles)
    if (!(p > 0.0 && p <= 100.0)) throw config_error("sweep percentiles must lie in (0, 100]");
  if (std::find(percentiles.begin(), percentiles.end(), 100.0) == percentiles.end()) percentiles.push_back(100.0);
  std::sort(percentiles.begin(), percentiles.end());
  percentiles.erase(std::unique(percentiles.begin(), percentiles.end()), percentiles.end());

  Prepared data = prepare(cfg);
  auto labels = labels_for(cfg, data.table);
  SweepResult result;
  result.architecture = resolve_autoencoder_config(cfg, data.encoded);
  for (double p : percentiles) {
    ae::AEConfig c = result.architecture;
    c.percentile = p;
    auto trained = ae::train(data.encoded, c);
    const auto errors = ae::reconstruction_errors(trained.model, data.encoded);
    const auto rec = eval::reconstruction_report(data.encoded, ae::reconstruct(trained.model, data.encoded));
    SweepRow row;
    row.percentile = p;
    row.lift = rec.lift;
    row.accuracy = rec.mean_accuracy;
    row.ora = rec.mean_ora;
    if (labels) row.detection = eval::detection_metrics(errors, *labels, cfg.precision_ks);
    result.rows.push_back(std::move(row));
  }
  return result;
}

// Metrics and their differences from p = 100, one row per percentile.
inline std::string sweep_csv(const SweepResult& r, const std::vector<std::size_t>& ks) {
  const SweepRow& base = baseline_row(r);
  std::vector<std::string> names = {"Lift", "Accuracy", "ORA"};
  const bool detect = base.detection.has_value();
  if (detect) {
    names.insert(names.end(), {"AUC", "NDCG@h", "R@h"});
    for (std::size_t k : ks) names.push_back("P@" + std::to_string(k));
  }
  auto values = [&](const SweepRow& row) {
    std::vector<double> v = {row.lift, row.accuracy, row.ora};
    if (detect) {
      v.insert(v.end(), {row.detection->auc, row.detection->ndcg_at_h, row.detection->recall_at_h});
      for (std::size_t k : ks) v.push_back(row.detection->precision_at_k.at(k));
    }
    return v;
  };
  std::vector<std::string> header = {"p"};
  for (const auto& n : names) header.push_back(n);
  for (const auto& n : names) header.push_back("delta_" + n);
  std::string out = csv::join(header) + "\n";
  const auto ref = values(base);
  for (const auto& row : r.rows) {
    const auto v = values(row);
    out += csv::fixed(row.percentile, 2);
    for (double x : v) out += "," + csv::fixed(x);
    for (std::size_t i = 0; i < v.size(); ++i) out += "," + csv::fixed(v[i] - ref[i]);
    out += "\n";
  }
  return out;
}

}  // namespace surveyqc::pipeline
