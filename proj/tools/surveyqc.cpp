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


// surveyqc command-line tool.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surveyqc/surveyqc.hpp"

namespace {

using namespace surveyqc;

struct CommonFlags {
  std::string config;
  std::string input;
  std::string schema;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string scorer;
  std::optional<double> percentile;
  std::optional<double> alpha;
  std::vector<std::string> labels;
  std::vector<std::string> pass_values;
  std::string label_mode;
  std::optional<std::size_t> check;
  std::string root;
  std::optional<std::string> id_column;
  bool tune = false;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Run configuration file");
  app->add_option("--input,-i", f.input, "Survey CSV");
  app->add_option("--schema", f.schema, "Stored schema.json (default: infer)");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--out,-o", f.out, "Output directory");
  app->add_option("--scorer", f.scorer, "chowliu | linear-ae | ae")
      ->check(CLI::IsMember({"chowliu", "linear-ae", "ae"}));
  app->add_option("--percentile", f.percentile, "Percentile-loss p in (0, 100]");
  app->add_option("--alpha", f.alpha, "Chow-Liu smoothing pseudo-count");
  app->add_option("--labels", f.labels, "Attention-check columns")->delimiter(',');
  app->add_option("--pass-values", f.pass_values, "Cell values that count as passing a check")->delimiter(',');
  app->add_option("--label-mode", f.label_mode, "single | union | intersection")
      ->check(CLI::IsMember({"single", "union", "intersection"}));
  app->add_option("--check", f.check, "Check index used with --label-mode single");
  app->add_option("--id-column", f.id_column, "Respondent id column (default: respondent_id when present)");
  app->add_option("--root", f.root, "Chow-Liu root variable (default: MI-central)");
  app->add_flag("--tune", f.tune, "Random hyperparameter search for the ae scorer");
  app->add_flag("--quiet,-q", f.quiet, "Suppress warnings");
}

pipeline::PipelineConfig resolve(const CommonFlags& f) {
  pipeline::PipelineConfig cfg;
  if (!f.config.empty()) pipeline::apply(KeyValueConfig::load(f.config), cfg);
  if (!f.input.empty()) cfg.input = f.input;
  if (!f.schema.empty()) cfg.schema_path = f.schema;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.scorer.empty()) cfg.scorer = pipeline::scorer_from_string(f.scorer);
  if (f.percentile) cfg.ae.percentile = *f.percentile;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (!f.labels.empty()) cfg.label_columns = f.labels;
  if (!f.pass_values.empty()) cfg.pass_values = f.pass_values;
  if (!f.label_mode.empty()) cfg.labels.mode = pipeline::label_mode_from_string(f.label_mode);
  if (f.check) cfg.labels.check = *f.check;
  if (!f.root.empty()) cfg.root_variable = f.root;
  if (f.id_column) {
    cfg.ingest.id_column = *f.id_column;
    cfg.ingest.require_id_column = !f.id_column->empty();
  }
  if (f.tune) cfg.tune = true;
  set_quiet(f.quiet);
  return cfg;
}

pipeline::FittedModel load_model(const std::string& path) {
  if (path.empty()) throw config_error("--model is required");
  return pipeline::model_from_json(pipeline::read_json(path));
}

void finish(const pipeline::PipelineConfig& cfg, const pipeline::Artifacts& files) {
  pipeline::write_artifacts(cfg.output_dir, files);
  for (const auto& [name, _] : files) std::cout << (cfg.output_dir / name).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Screening survey respondents for careless answering"};
  app.require_subcommand(1);

  CommonFlags f;
  auto* schema_cmd = app.add_subcommand("schema-infer", "Infer a survey schema");
  auto* encode_cmd = app.add_subcommand("encode", "One-hot encode a survey");
  auto* fit_cmd = app.add_subcommand("fit", "Fit a scorer");
  auto* score_cmd = app.add_subcommand("score", "Score respondents with a fitted model");
  auto* eval_cmd = app.add_subcommand("evaluate", "Detection and reconstruction reports");
  auto* run_cmd = app.add_subcommand("run", "Full pipeline: fit, score and evaluate");
  auto* sweep_cmd = app.add_subcommand("sweep", "Percentile-loss trade-off sweep");
  auto* cost_cmd = app.add_subcommand("cost", "Compare screening costs");
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic survey");
  for (auto* c : {schema_cmd, encode_cmd, fit_cmd, score_cmd, eval_cmd, run_cmd, sweep_cmd, cost_cmd, synth_cmd})
    add_common(c, f);
  for (auto* c : {score_cmd, eval_cmd}) c->add_option("--model", f.model, "Fitted model.json")->required();

  int cv_folds = 0;
  run_cmd->add_flag("--cv{5}", cv_folds, "Out-of-sample AUC by K-fold refitting (--cv=K, default 5)");

  std::vector<double> percentiles;
  sweep_cmd->add_option("--percentiles", percentiles, "Sweep points (100 is always added)")->delimiter(',');

  eval::CostParams cost;
  cost_cmd->add_option("--n", cost.n_respondents, "Respondents")->required();
  cost_cmd->add_option("--c-tax", cost.c_tax, "Per-respondent attention-check cost")->required();
  cost_cmd->add_option("--c-noise", cost.c_noise, "Cost of keeping a careless respondent")->required();
  cost_cmd->add_option("--c-discard", cost.c_discard, "Cost of discarding an attentive respondent")->required();
  cost_cmd->add_option("--contamination", cost.contamination_rate, "Careless fraction c")->required();
  cost_cmd->add_option("--fnr", cost.fnr, "Model false-negative rate")->required();
  cost_cmd->add_option("--fpr", cost.fpr, "Model false-positive rate")->required();
  cost_cmd->add_option("--c-compute", cost.c_compute, "Fixed modelling cost");

  synth::SyntheticSpec spec;
  synth_cmd->add_option("--attentive", spec.n_attentive);
  synth_cmd->add_option("--inattentive", spec.n_inattentive);
  synth_cmd->add_option("--variables", spec.n_variables);
  synth_cmd->add_option("--categories", spec.categories, "One value, or one per variable")->delimiter(',');
  synth_cmd->add_option("--strength", spec.strength, "Probability a child follows its parent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    pipeline::PipelineConfig cfg = resolve(f);
    pipeline::Artifacts files;

    if (*schema_cmd) {
      cfg.validate();
      auto table = csv::read_file(cfg.input);
      files["schema.json"] = pipeline::dump(to_json(infer_schema(table, pipeline::ingest_options(cfg))));
    } else if (*encode_cmd) {
      cfg.validate();
      auto data = pipeline::prepare(cfg);
      files["schema.json"] = pipeline::dump(to_json(data.schema));
      files["encoded.csv"] = encoded_csv(data.encoded, data.schema);
    } else if (*fit_cmd) {
      cfg.validate();
      auto data = pipeline::prepare(cfg);
      auto model = pipeline::fit(cfg, data);
      files["schema.json"] = pipeline::dump(to_json(data.schema));
      files["model.json"] = pipeline::dump(pipeline::to_json(model));
      if (model.train_report) files["train_report.json"] = pipeline::dump(pipeline::to_json(*model.train_report));
    } else if (*score_cmd) {
      cfg.validate();
      files = pipeline::score_with(cfg, load_model(f.model));
    } else if (*eval_cmd) {
      cfg.validate();
      files = pipeline::evaluate_with(cfg, load_model(f.model));
    } else if (*run_cmd) {
      if (cv_folds != 0) cfg.cv_folds = cv_folds;
      files = pipeline::run(cfg);
    } else if (*sweep_cmd) {
      if (f.scorer.empty() && cfg.scorer == pipeline::ScorerKind::chowliu) cfg.scorer = pipeline::ScorerKind::ae;
      auto result = pipeline::sweep(cfg, percentiles.empty() ? cfg.sweep_percentiles : percentiles);
      files["sweep.csv"] = pipeline::sweep_csv(result, cfg.precision_ks);
    } else if (*cost_cmd) {
      auto outcome = eval::screening_cost(cost);
      nlohmann::ordered_json j;
      j["L_AC"] = outcome.attention_check_cost;
      j["C_model"] = outcome.per_respondent_model_cost;
      j["L_UM"] = outcome.unsupervised_cost;
      j["recommendation"] = eval::to_string(outcome.recommendation);
      if (f.out.empty()) {
        std::cout << j.dump(2) << "\n";
        return 0;
      }
      files["cost.json"] = pipeline::dump(j);
    } else if (*synth_cmd) {
      spec.seed = cfg.seed;
      auto survey = synth::generate(spec);
      files["survey.csv"] = csv::format(survey.table);
      files["labels.csv"] = synth::labels_csv(survey);
    }
    finish(cfg, files);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
