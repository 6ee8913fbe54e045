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

// Dense autoencoders over one-hot survey responses.
//
// Two families share one implementation: a linear autoencoder (one bias-free
// linear map into the latent space and one back) and a non-linear autoencoder
// with hidden dense layers, batch normalization and dropout. Both squash the
// final decoder output through a logistic so the per-variable weighted binary
// cross-entropy is defined.
//
// Training minimizes the percentile loss: per mini-batch only the k lowest
// per-respondent losses are averaged, k = max(1, floor(p/100 * B)), so that
// high-error respondents do not steer the weights. Gradients are derived by
// hand and checked against finite differences in the test suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "surveyqc/common.hpp"
#include "surveyqc/evaluation.hpp"
#include "surveyqc/random.hpp"
#include "surveyqc/survey_data.hpp"

namespace surveyqc::ae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kProbabilityClip = 1e-7;
inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

enum class Activation { identity, sigmoid, relu, selu, gelu, swish };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::selu: return "selu";
    case Activation::gelu: return "gelu";
    case Activation::swish: return "swish";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  for (Activation a : {Activation::identity, Activation::sigmoid, Activation::relu, Activation::selu,
                       Activation::gelu, Activation::swish})
    if (to_string(a) == s) return a;
  throw config_error("unknown activation '" + s + "'");
}

namespace detail {

inline constexpr double kSeluScale = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::sigmoid: return logistic(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::selu: return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    case Activation::swish: return x * logistic(x);
  }
  return x;
}

inline double derivative(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: {
      double s = logistic(x);
      return s * (1.0 - s);
    }
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::selu: return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
    case Activation::gelu:
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    case Activation::swish: {
      double s = logistic(x);
      return s + x * s * (1.0 - s);
    }
  }
  return 1.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration

struct LayerSpec {
  int units = 64;
  Activation activation = Activation::relu;
  double l2 = 0.0;
  double dropout = 0.0;
  bool batch_norm = true;

  bool operator==(const LayerSpec&) const = default;
};

struct AEConfig {
  std::vector<LayerSpec> encoder;
  int latent_dim = 8;
  Activation latent_activation = Activation::relu;
  std::vector<LayerSpec> decoder;
  double latent_l2 = 0.0;  // L2 on the latent projection
  double output_l2 = 0.0;  // L2 on the output projection
  double learning_rate = 1e-3;
  double percentile = 100.0;
  int batch_size = 32;
  int max_epochs = 300;
  int early_stop_patience = 10;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  bool linear_mode = false;

  bool operator==(const AEConfig&) const = default;

  // Zero hidden layers, bias-free linear maps, no regularizers.
  static AEConfig linear(int latent_dim) {
    AEConfig c;
    c.linear_mode = true;
    c.latent_dim = latent_dim;
    c.latent_activation = Activation::identity;
    c.learning_rate = 1e-2;
    return c;
  }

  // Small non-linear architecture used when no tuning is requested.
  static AEConfig small() {
    AEConfig c;
    c.encoder = {LayerSpec{64, Activation::relu, 0.0, 0.0, true}};
    c.decoder = {LayerSpec{64, Activation::relu, 0.0, 0.0, true}};
    c.latent_dim = 8;
    c.latent_activation = Activation::relu;
    c.learning_rate = 1e-3;
    return c;
  }

  void validate(std::size_t input_dim) const {
    if (input_dim < 2) throw config_error("autoencoder input dimension must be at least 2");
    if (latent_dim < 1) throw config_error("latent_dim must be positive");
    if (static_cast<std::size_t>(latent_dim) >= input_dim)
      throw config_error("latent_dim (" + std::to_string(latent_dim) + ") must be below the input dimension (" +
                         std::to_string(input_dim) + ")");
    if (!(percentile > 0.0 && percentile <= 100.0)) throw config_error("percentile must lie in (0, 100]");
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
    if (batch_size < 1 || max_epochs < 1 || early_stop_patience < 1)
      throw config_error("batch_size, max_epochs and early_stop_patience must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw config_error("validation_fraction must lie in (0, 1)");
    if (latent_l2 < 0.0 || output_l2 < 0.0) throw config_error("l2 must be non-negative");
    if (linear_mode) {
      if (!encoder.empty() || !decoder.empty()) throw config_error("linear mode has no hidden layers");
      return;
    }
    for (const auto* side : {&encoder, &decoder})
      for (const auto& l : *side) {
        if (l.units < 1) throw config_error("layer units must be positive");
        if (l.l2 < 0.0) throw config_error("l2 must be non-negative");
        if (!(l.dropout >= 0.0 && l.dropout < 1.0)) throw config_error("dropout must lie in [0, 1)");
      }
  }
};

// ---------------------------------------------------------------------------
// Model

// Trainable tensors of one dense layer. Empty vectors mean "absent".
struct LayerParams {
  Matrix weight;  // out x in
  Vector bias;
  Vector gamma;   // batch-norm scale
  Vector beta;    // batch-norm shift
};

struct Layer {
  LayerParams params;
  Activation activation = Activation::identity;
  double l2 = 0.0;
  double dropout = 0.0;
  bool batch_norm = false;
  Vector running_mean;
  Vector running_var;

  Eigen::Index in_dim() const { return params.weight.cols(); }
  Eigen::Index out_dim() const { return params.weight.rows(); }
};

using ParamSet = std::vector<LayerParams>;

struct AEModel {
  std::vector<Layer> layers;
  std::vector<Block> blocks;
  std::size_t input_dim = 0;
  AEConfig config;

  ParamSet params() const {
    ParamSet p;
    for (const auto& l : layers) p.push_back(l.params);
    return p;
  }
};

// Visits every trainable tensor of matching parameter sets in a fixed order.
template <typename F, typename... Sets>
void for_each_tensor(F&& f, Sets&... sets) {
  auto& first = std::get<0>(std::tie(sets...));
  for (std::size_t l = 0; l < first.size(); ++l) {
    f(sets[l].weight...);
    if (first[l].bias.size()) f(sets[l].bias...);
    if (first[l].gamma.size()) f(sets[l].gamma...);
    if (first[l].beta.size()) f(sets[l].beta...);
  }
}

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet z = p;
  for_each_tensor([](auto& t) { t.setZero(); }, z);
  return z;
}

inline std::size_t parameter_count(const ParamSet& p) {
  std::size_t n = 0;
  ParamSet copy = p;
  for_each_tensor([&n](auto& t) { n += static_cast<std::size_t>(t.size()); }, copy);
  return n;
}

// Raw pointers to every scalar parameter, in for_each_tensor order.
inline std::vector<double*> parameter_handles(ParamSet& p) {
  std::vector<double*> out;
  for_each_tensor(
      [&out](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data() + i);
      },
      p);
  return out;
}

inline void set_params(AEModel& model, const ParamSet& p) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) model.layers[l].params = p[l];
}

namespace detail {

inline Layer make_layer(Rng& rng, Eigen::Index in, Eigen::Index out, Activation act, bool bias, double l2,
                        double dropout, bool bn) {
  Layer layer;
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  layer.params.weight.resize(out, in);
  // Row-major fill order keeps the draw sequence independent of storage.
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) layer.params.weight(r, c) = rng.uniform(-limit, limit);
  if (bias) layer.params.bias = Vector::Zero(out);
  layer.activation = act;
  layer.l2 = l2;
  layer.dropout = dropout;
  layer.batch_norm = bn;
  if (bn) {
    layer.params.gamma = Vector::Ones(out);
    layer.params.beta = Vector::Zero(out);
    layer.running_mean = Vector::Zero(out);
    layer.running_var = Vector::Ones(out);
  }
  return layer;
}

}  // namespace detail

// Builds an untrained model. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// biases zero; the same (config, input_dim, seed) gives identical weights.
inline AEModel init_model(const AEConfig& config, std::size_t input_dim, std::uint64_t seed,
                          std::vector<Block> blocks = {}) {
  config.validate(input_dim);
  Rng rng(derive_seed(seed, 1));
  AEModel model;
  model.config = config;
  model.input_dim = input_dim;
  model.blocks = std::move(blocks);
  const auto d = static_cast<Eigen::Index>(input_dim);
  const Eigen::Index m = config.latent_dim;

  if (config.linear_mode) {
    model.layers.push_back(detail::make_layer(rng, d, m, Activation::identity, false, config.latent_l2, 0.0, false));
    model.layers.push_back(detail::make_layer(rng, m, d, Activation::sigmoid, false, config.output_l2, 0.0, false));
    return model;
  }
  Eigen::Index width = d;
  for (const auto& l : config.encoder) {
    model.layers.push_back(detail::make_layer(rng, width, l.units, l.activation, true, l.l2, l.dropout, l.batch_norm));
    width = l.units;
  }
  model.layers.push_back(detail::make_layer(rng, width, m, config.latent_activation, true, config.latent_l2, 0.0, false));
  width = m;
  for (const auto& l : config.decoder) {
    model.layers.push_back(detail::make_layer(rng, width, l.units, l.activation, true, l.l2, l.dropout, l.batch_norm));
    width = l.units;
  }
  model.layers.push_back(detail::make_layer(rng, width, d, Activation::sigmoid, true, config.output_l2, 0.0, false));
  return model;
}

// ---------------------------------------------------------------------------
// Forward pass

struct LayerCache {
  Matrix input;       // B x in
  Matrix normalized;  // batch-norm x-hat (training only)
  RowVector batch_mean;
  RowVector batch_var;
  Matrix preact;      // B x out, after batch norm, before activation
  Matrix mask;        // dropout mask already divided by (1 - rate); empty if unused
};

struct ForwardPass {
  Matrix output;  // B x d in (0, 1)
  std::vector<LayerCache> caches;
};

// Runs the network. In training mode batch norm uses batch statistics and
// dropout draws masks from `dropout_rng` (required when any layer drops).
inline ForwardPass forward_pass(const AEModel& model, const Matrix& batch, bool training, Rng* dropout_rng = nullptr) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim)
    throw data_error("batch width " + std::to_string(batch.cols()) + " does not match model input " +
                     std::to_string(model.input_dim));
  ForwardPass fp;
  fp.caches.resize(model.layers.size());
  Matrix a = batch;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    LayerCache& cache = fp.caches[l];
    cache.input = std::move(a);
    Matrix z = cache.input * layer.params.weight.transpose();
    if (layer.params.bias.size()) z.rowwise() += layer.params.bias.transpose();
    if (layer.batch_norm) {
      RowVector mu, var;
      if (training) {
        mu = z.colwise().mean();
        var = (z.rowwise() - mu).array().square().colwise().mean();
        cache.batch_mean = mu;
        cache.batch_var = var;
      } else {
        mu = layer.running_mean.transpose();
        var = layer.running_var.transpose();
      }
      RowVector inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
      cache.normalized = (z.rowwise() - mu).array().rowwise() * inv_std.array();
      z = (cache.normalized.array().rowwise() * layer.params.gamma.transpose().array()).rowwise() +
          layer.params.beta.transpose().array();
    }
    cache.preact = z;
    a = z.unaryExpr([act = layer.activation](double x) { return detail::activate(act, x); });
    if (training && layer.dropout > 0.0) {
      if (!dropout_rng) throw config_error("dropout requires a random stream in training mode");
      const double keep = 1.0 - layer.dropout;
      cache.mask.resize(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) cache.mask(r, c) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(cache.mask);
    }
  }
  fp.output = std::move(a);
  return fp;
}

// Inference-mode reconstruction of a batch.
inline Matrix forward(const AEModel& model, const Matrix& batch, bool training = false, Rng* dropout_rng = nullptr) {
  return forward_pass(model, batch, training, dropout_rng).output;
}

// ---------------------------------------------------------------------------
// Losses

inline double clip_probability(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

// Per-feature weights 1 / (|V| ln|F_v|) of the variable-normalized BCE.
inline Vector feature_weights(std::span<const Block> blocks, std::size_t input_dim) {
  if (blocks.empty()) throw data_error("base loss needs a block layout");
  Vector w = Vector::Zero(static_cast<Eigen::Index>(input_dim));
  const double nv = static_cast<double>(blocks.size());
  for (const Block& b : blocks) {
    if (b.size() < 2) throw data_error("every variable block needs at least two features");
    if (b.end > input_dim) throw data_error("block exceeds input dimension");
    for (std::size_t f = b.begin; f < b.end; ++f)
      w(static_cast<Eigen::Index>(f)) = 1.0 / (nv * std::log(static_cast<double>(b.size())));
  }
  return w;
}

// Variable-normalized binary cross-entropy of one respondent:
// (1/|V|) sum_v (1/ln|F_v|) sum_{f in F_v} BCE(x_f, clip(xhat_f)).
inline double base_loss(std::span<const double> x, std::span<const double> xhat, std::span<const Block> blocks) {
  if (x.size() != xhat.size()) throw data_error("base_loss: length mismatch");
  if (blocks.empty()) throw data_error("base loss needs a block layout");
  double total = 0.0;
  for (const Block& b : blocks) {
    if (b.size() < 2) throw data_error("every variable block needs at least two features");
    double sum = 0.0;
    for (std::size_t f = b.begin; f < b.end; ++f) {
      double p = clip_probability(xhat[f]);
      sum -= x[f] * std::log(p) + (1.0 - x[f]) * std::log(1.0 - p);
    }
    total += sum / std::log(static_cast<double>(b.size()));
  }
  return total / static_cast<double>(blocks.size());
}

// Base loss of every row of a batch.
inline Vector row_losses(const Matrix& x, const Matrix& xhat, const Vector& weights) {
  Matrix p = xhat.unaryExpr([](double v) { return clip_probability(v); });
  Matrix bce = -(x.array() * p.array().log() + (1.0 - x.array()) * (1.0 - p.array()).log());
  return bce * weights;
}

// Number of retained samples for a batch of size b at percentile p.
inline std::size_t retained_count(std::size_t b, double percentile) {
  auto k = static_cast<std::size_t>(std::floor(percentile * static_cast<double>(b) / 100.0));
  return std::max<std::size_t>(1, std::min(k, b));
}

// Indices of the k smallest losses; ties keep ascending index order.
inline std::vector<std::size_t> retained_indices(std::span<const double> losses, double percentile) {
  std::vector<std::size_t> idx(losses.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  idx.resize(retained_count(losses.size(), percentile));
  return idx;
}

// Mean of the k = max(1, floor(p/100 * B)) smallest losses.
inline double percentile_loss(std::span<const double> losses, double percentile) {
  if (losses.empty()) throw data_error("percentile_loss of an empty batch");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw config_error("percentile must lie in (0, 100]");
  auto keep = retained_indices(losses, percentile);
  double sum = 0.0;
  for (std::size_t i : keep) sum += losses[i];
  return sum / static_cast<double>(keep.size());
}

inline double l2_penalty(const AEModel& model) {
  double pen = 0.0;
  for (const auto& l : model.layers) pen += l.l2 * l.params.weight.squaredNorm();
  return pen;
}

// ---------------------------------------------------------------------------
// Objective and gradient

struct BatchObjective {
  double objective = 0.0;  // percentile loss + L2 penalty
  double percentile_loss = 0.0;
  Vector sample_losses;
  std::vector<std::size_t> retained;
  ParamSet gradient;
  ForwardPass pass;
};

// Percentile-loss objective of one mini-batch and its exact gradient.
// Only retained samples seed the backward pass; with batch norm the batch
// statistics still couple all samples.
inline BatchObjective batch_objective(const AEModel& model, const Matrix& x, double percentile, bool training,
                                      Rng* dropout_rng = nullptr, bool with_gradient = true) {
  BatchObjective out;
  out.pass = forward_pass(model, x, training, dropout_rng);
  const Vector weights = feature_weights(model.blocks, model.input_dim);
  out.sample_losses = row_losses(x, out.pass.output, weights);
  std::span<const double> losses(out.sample_losses.data(), static_cast<std::size_t>(out.sample_losses.size()));
  out.retained = retained_indices(losses, percentile);
  double sum = 0.0;
  for (std::size_t i : out.retained) sum += losses[i];
  out.percentile_loss = sum / static_cast<double>(out.retained.size());
  out.objective = out.percentile_loss + l2_penalty(model);
  if (!with_gradient) return out;

  const Eigen::Index b = x.rows();
  const double inv_k = 1.0 / static_cast<double>(out.retained.size());
  Vector coef = Vector::Zero(b);
  for (std::size_t i : out.retained) coef(static_cast<Eigen::Index>(i)) = inv_k;

  // d(objective)/d(logits) of the sigmoid output, zero where the clip is active.
  const Matrix& xhat = out.pass.output;
  Matrix grad(b, x.cols());
  for (Eigen::Index r = 0; r < b; ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double p = xhat(r, c);
      bool clipped = p < kProbabilityClip || p > 1.0 - kProbabilityClip;
      grad(r, c) = clipped ? 0.0 : coef(r) * weights(c) * (p - x(r, c));
    }

  out.gradient.resize(model.layers.size());
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const Layer& layer = model.layers[li];
    const LayerCache& cache = out.pass.caches[li];
    LayerParams& g = out.gradient[li];
    // grad currently holds d/d(activation output), except for the output
    // layer where it is already d/d(pre-activation).
    Matrix dpre;
    if (li + 1 == model.layers.size()) {
      dpre = std::move(grad);
    } else {
      if (cache.mask.size()) grad = grad.cwiseProduct(cache.mask);
      dpre = grad.cwiseProduct(
          cache.preact.unaryExpr([act = layer.activation](double v) { return detail::derivative(act, v); }));
    }
    Matrix dz;
    if (layer.batch_norm) {
      g.gamma = dpre.cwiseProduct(cache.normalized).colwise().sum().transpose();
      g.beta = dpre.colwise().sum().transpose();
      Matrix dxhat = dpre.array().rowwise() * layer.params.gamma.transpose().array();
      if (training) {
        const RowVector inv_std = (cache.batch_var.array() + kBatchNormEpsilon).rsqrt();
        const RowVector sum_dxhat = dxhat.colwise().sum();
        const RowVector sum_dxhat_xhat = dxhat.cwiseProduct(cache.normalized).colwise().sum();
        const double bn = static_cast<double>(b);
        Matrix centered = (dxhat * bn).rowwise() - sum_dxhat;
        centered -= (cache.normalized.array().rowwise() * sum_dxhat_xhat.array()).matrix();
        dz = (centered.array().rowwise() * inv_std.array()).matrix() / bn;
      } else {
        const RowVector inv_std = (layer.running_var.transpose().array() + kBatchNormEpsilon).rsqrt();
        dz = dxhat.array().rowwise() * inv_std.array();
      }
    } else {
      dz = std::move(dpre);
    }
    g.weight = dz.transpose() * cache.input + 2.0 * layer.l2 * layer.params.weight;
    if (layer.params.bias.size()) g.bias = dz.colwise().sum().transpose();
    if (li > 0) grad = dz * layer.params.weight;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
  std::vector<double> train_loss;       // mean mini-batch objective per epoch
  std::vector<double> validation_loss;  // mean base loss on the held-out split
  int best_epoch = 0;                   // 1-based
  int stopped_epoch = 0;                // 1-based, last epoch run

  double best_validation_loss() const {
    return best_epoch > 0 ? validation_loss[static_cast<std::size_t>(best_epoch - 1)]
                          : std::numeric_limits<double>::infinity();
  }
  bool operator==(const TrainReport&) const = default;
};

inline Matrix to_matrix(const EncodedMatrix& data) {
  Matrix x(static_cast<Eigen::Index>(data.rows), static_cast<Eigen::Index>(data.cols));
  for (std::size_t r = 0; r < data.rows; ++r)
    for (std::size_t c = 0; c < data.cols; ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data.at(r, c);
  return x;
}

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Mean base loss in inference mode.
inline double mean_base_loss(const AEModel& model, const Matrix& x) {
  const Vector weights = feature_weights(model.blocks, model.input_dim);
  return row_losses(x, forward(model, x), weights).mean();
}

namespace detail {

// Adam with the usual defaults.
class Adam {
 public:
  Adam(const ParamSet& like, double lr) : lr_(lr), m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(AEModel& model, const ParamSet& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
      p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      LayerParams& p = model.layers[l].params;
      update(p.weight, grad[l].weight, m_[l].weight, v_[l].weight);
      if (p.bias.size()) update(p.bias, grad[l].bias, m_[l].bias, v_[l].bias);
      if (p.gamma.size()) update(p.gamma, grad[l].gamma, m_[l].gamma, v_[l].gamma);
      if (p.beta.size()) update(p.beta, grad[l].beta, m_[l].beta, v_[l].beta);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  ParamSet m_, v_;
  int t_ = 0;
};

inline void update_running_stats(AEModel& model, const ForwardPass& pass) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    if (!layer.batch_norm) continue;
    layer.running_mean = kBatchNormMomentum * layer.running_mean +
                         (1.0 - kBatchNormMomentum) * pass.caches[l].batch_mean.transpose();
    layer.running_var = kBatchNormMomentum * layer.running_var +
                        (1.0 - kBatchNormMomentum) * pass.caches[l].batch_var.transpose();
  }
}

}  // namespace detail

struct TrainResult {
  AEModel model;
  TrainReport report;
};

// Mini-batch Adam on the percentile-loss objective with early stopping on
// the validation split (plain mean base loss). Returns the weights of the
// best validation epoch.
inline TrainResult train(const EncodedMatrix& data, const AEConfig& config) {
  config.validate(data.cols);
  if (data.rows < 10) throw data_error("autoencoder training needs at least 10 respondents");
  const auto n = data.rows;
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  if (n_val < 1 || n_val >= n) throw data_error("validation split must hold at least one and fewer than all rows");

  Rng split_rng(derive_seed(config.seed, 2));
  Rng shuffle_rng(derive_seed(config.seed, 3));
  Rng dropout_rng(derive_seed(config.seed, 4));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  split_rng.shuffle(order);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Matrix x = to_matrix(data);
  const Matrix x_val = gather_rows(x, val_rows);

  TrainResult result{init_model(config, data.cols, config.seed, data.blocks), {}};
  AEModel& model = result.model;
  detail::Adam adam(model.params(), config.learning_rate);

  AEModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(train_rows);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, train_rows.size());
      std::span<const std::size_t> rows(train_rows.data() + start, stop - start);
      Matrix xb = gather_rows(x, rows);
      BatchObjective obj = batch_objective(model, xb, config.percentile, true, &dropout_rng);
      if (!std::isfinite(obj.objective)) throw numeric_error("training objective became non-finite");
      loss_sum += obj.objective * static_cast<double>(rows.size());
      detail::update_running_stats(model, obj.pass);
      adam.step(model, obj.gradient);
    }
    const double val = mean_base_loss(model, x_val);
    if (!std::isfinite(val)) throw numeric_error("validation loss became non-finite");
    result.report.train_loss.push_back(loss_sum / static_cast<double>(train_rows.size()));
    result.report.validation_loss.push_back(val);
    result.report.stopped_epoch = epoch;
    if (val < best_val) {
      best_val = val;
      best = model;
      result.report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Scoring

inline eval::ScoreMatrix reconstruct(const AEModel& model, const EncodedMatrix& data) {
  if (data.cols != model.input_dim || (!model.blocks.empty() && data.blocks != model.blocks))
    throw data_error("encoded data layout does not match the autoencoder");
  Matrix out = forward(model, to_matrix(data));
  eval::ScoreMatrix s;
  s.rows = data.rows;
  s.cols = data.cols;
  s.values.resize(s.rows * s.cols);
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c)
      s.values[r * s.cols + c] = out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return s;
}

// Per-respondent base loss in inference mode; the percentile never applies
// at scoring time.
inline std::vector<double> reconstruction_errors(const AEModel& model, const EncodedMatrix& data) {
  if (data.cols != model.input_dim || (!model.blocks.empty() && data.blocks != model.blocks))
    throw data_error("encoded data layout does not match the autoencoder");
  const Matrix x = to_matrix(data);
  const Vector losses = row_losses(x, forward(model, x), feature_weights(model.blocks, model.input_dim));
  return {losses.data(), losses.data() + losses.size()};
}

// ---------------------------------------------------------------------------
// Hyperparameter search

struct SearchSpace {
  std::vector<double> learning_rates = {1e-4, 1e-3, 1e-2};
  std::vector<int> layer_counts = {1, 2, 3};
  std::vector<int> units = {64, 96, 128, 160, 192, 224, 256};
  std::vector<Activation> activations = {Activation::relu, Activation::selu, Activation::gelu, Activation::swish};
  std::vector<double> l2 = {0.0, 1e-3, 1e-2};
  std::vector<double> dropout = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<bool> batch_norm = {true};
  std::vector<int> latent_dims = [] {
    std::vector<int> v;
    for (int m = 2; m <= 50; ++m) v.push_back(m);
    return v;
  }();
};

struct TrialResult {
  AEConfig config;
  double validation_loss = 0.0;
};

struct TuneResult {
  AEConfig best;
  std::vector<TrialResult> trials;
};

namespace detail {

inline std::vector<LayerSpec> sample_stack(Rng& rng, const SearchSpace& s) {
  const int count = rng.pick(s.layer_counts);
  // One draw per hyperparameter, shared by every layer of the stack.
  LayerSpec spec;
  spec.units = rng.pick(s.units);
  spec.activation = rng.pick(s.activations);
  spec.l2 = rng.pick(s.l2);
  spec.dropout = rng.pick(s.dropout);
  spec.batch_norm = s.batch_norm[rng.below(s.batch_norm.size())];
  return std::vector<LayerSpec>(static_cast<std::size_t>(count), spec);
}

}  // namespace detail

// Seeded random search; `base` supplies the non-searched training settings
// (percentile, batch size, epochs, patience, split, seed).
inline TuneResult tune(const EncodedMatrix& data, const AEConfig& base, const SearchSpace& space, int trials,
                       std::uint64_t seed) {
  if (trials < 1) throw config_error("tuning needs at least one trial");
  std::vector<int> latent;
  for (int m : space.latent_dims)
    if (m >= 1 && static_cast<std::size_t>(m) < data.cols) latent.push_back(m);
  if (space.learning_rates.empty() || space.layer_counts.empty() || space.units.empty() ||
      space.activations.empty() || space.l2.empty() || space.dropout.empty() || space.batch_norm.empty() ||
      latent.empty())
    throw config_error("hyperparameter search space is empty");

  Rng rng(derive_seed(seed, 5));
  TuneResult out;
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    AEConfig c = base;
    c.linear_mode = false;
    c.learning_rate = rng.pick(space.learning_rates);
    c.encoder = detail::sample_stack(rng, space);
    c.latent_dim = rng.pick(latent);
    c.latent_activation = rng.pick(space.activations);
    c.decoder = detail::sample_stack(rng, space);
    c.latent_l2 = c.encoder.front().l2;
    c.output_l2 = c.decoder.front().l2;
    auto trained = train(data, c);
    const double val = trained.report.best_validation_loss();
    out.trials.push_back({c, val});
    if (val < best) {
      best = val;
      out.best = c;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json to_json(const LayerSpec& l) {
  return {{"units", l.units}, {"activation", to_string(l.activation)}, {"l2", l.l2},
          {"dropout", l.dropout}, {"batch_norm", l.batch_norm}};
}

inline nlohmann::ordered_json to_json(const AEConfig& c) {
  nlohmann::ordered_json j;
  j["linear_mode"] = c.linear_mode;
  nlohmann::ordered_json enc = nlohmann::ordered_json::array(), dec = nlohmann::ordered_json::array();
  for (const auto& l : c.encoder) enc.push_back(to_json(l));
  for (const auto& l : c.decoder) dec.push_back(to_json(l));
  j["encoder"] = enc;
  j["latent_dim"] = c.latent_dim;
  j["latent_activation"] = to_string(c.latent_activation);
  j["decoder"] = dec;
  j["latent_l2"] = c.latent_l2;
  j["output_l2"] = c.output_l2;
  j["learning_rate"] = c.learning_rate;
  j["percentile"] = c.percentile;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["early_stop_patience"] = c.early_stop_patience;
  j["validation_fraction"] = c.validation_fraction;
  j["seed"] = c.seed;
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  LayerSpec l;
  l.units = j.at("units").get<int>();
  l.activation = activation_from_string(j.at("activation").get<std::string>());
  l.l2 = j.at("l2").get<double>();
  l.dropout = j.at("dropout").get<double>();
  l.batch_norm = j.at("batch_norm").get<bool>();
  return l;
}

inline AEConfig config_from_json(const nlohmann::json& j) {
  AEConfig c;
  c.linear_mode = j.at("linear_mode").get<bool>();
  for (const auto& l : j.at("encoder")) c.encoder.push_back(layer_spec_from_json(l));
  c.latent_dim = j.at("latent_dim").get<int>();
  c.latent_activation = activation_from_string(j.at("latent_activation").get<std::string>());
  for (const auto& l : j.at("decoder")) c.decoder.push_back(layer_spec_from_json(l));
  c.latent_l2 = j.at("latent_l2").get<double>();
  c.output_l2 = j.at("output_l2").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.percentile = j.at("percentile").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace detail {

template <typename Derived>
std::vector<double> flatten_row_major(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const AEModel& m) {
  nlohmann::ordered_json doc;
  doc["format"] = "surveyqc.autoencoder";
  doc["version"] = 1;
  doc["input_dim"] = m.input_dim;
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const auto& b : m.blocks) blocks.push_back({b.variable, b.begin, b.end});
  doc["blocks"] = blocks;
  doc["config"] = to_json(m.config);
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) {
    nlohmann::ordered_json j;
    j["in"] = l.in_dim();
    j["out"] = l.out_dim();
    j["activation"] = to_string(l.activation);
    j["l2"] = l.l2;
    j["dropout"] = l.dropout;
    j["weight"] = detail::flatten_row_major(l.params.weight);
    if (l.params.bias.size()) j["bias"] = detail::flatten_row_major(l.params.bias.transpose());
    if (l.batch_norm) {
      j["batch_norm"] = {{"gamma", detail::flatten_row_major(l.params.gamma.transpose())},
                         {"beta", detail::flatten_row_major(l.params.beta.transpose())},
                         {"running_mean", detail::flatten_row_major(l.running_mean.transpose())},
                         {"running_var", detail::flatten_row_major(l.running_var.transpose())}};
    }
    layers.push_back(std::move(j));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

inline AEModel autoencoder_from_json(const nlohmann::json& doc) {
  AEModel m;
  try {
    if (doc.at("format").get<std::string>() != "surveyqc.autoencoder")
      throw data_error("not an autoencoder model file");
    if (doc.at("version").get<int>() != 1) throw data_error("unsupported autoencoder model version");
    m.input_dim = doc.at("input_dim").get<std::size_t>();
    for (const auto& b : doc.at("blocks")) m.blocks.push_back({b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>()});
    m.config = config_from_json(doc.at("config"));
    for (const auto& j : doc.at("layers")) {
      Layer l;
      const auto in = j.at("in").get<Eigen::Index>();
      const auto out = j.at("out").get<Eigen::Index>();
      l.activation = activation_from_string(j.at("activation").get<std::string>());
      l.l2 = j.at("l2").get<double>();
      l.dropout = j.at("dropout").get<double>();
      auto w = j.at("weight").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != in * out) throw data_error("weight array has the wrong size");
      l.params.weight.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) l.params.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
      if (j.contains("bias")) l.params.bias = detail::to_vector(j.at("bias").get<std::vector<double>>());
      if (j.contains("batch_norm")) {
        const auto& bn = j.at("batch_norm");
        l.batch_norm = true;
        l.params.gamma = detail::to_vector(bn.at("gamma").get<std::vector<double>>());
        l.params.beta = detail::to_vector(bn.at("beta").get<std::vector<double>>());
        l.running_mean = detail::to_vector(bn.at("running_mean").get<std::vector<double>>());
        l.running_var = detail::to_vector(bn.at("running_var").get<std::vector<double>>());
      }
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed autoencoder model JSON: ") + e.what());
  }
  return m;
}

}  // namespace surveyqc::ae
