// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/gcn_predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "npnas/metrics.hpp"
#include "npnas/text.hpp"
#include "trainer.hpp"

namespace npnas {

// ---------------------------------------------------------------------------
// Config

GcnConfig GcnConfig::nasbench_regressor() { return GcnConfig{}; }

GcnConfig GcnConfig::nasbench_classifier() {
  GcnConfig cfg;
  cfg.output_head = OutputHead::kClassification;
  cfg.train.lr0 = 2e-4;
  return cfg;
}

GcnConfig GcnConfig::proxyless_regressor() {
  GcnConfig cfg;
  cfg.num_gc_layers = 18;
  cfg.node_dim = 96;
  cfg.fc_hidden_dims = {512, 128};
  cfg.train.lr0 = 1e-3;
  cfg.train.weight_decay = 1e-5;
  return cfg;
}

void GcnConfig::validate() const {
  if (num_gc_layers < 1) throw std::invalid_argument("gcn: layers must be >= 1");
  if (node_dim < 1) throw std::invalid_argument("gcn: node_dim must be >= 1");
  for (int h : fc_hidden_dims)
    if (h < 1) throw std::invalid_argument("gcn: fc hidden sizes must be >= 1");
  if (!(train.dropout_rate >= 0.0 && train.dropout_rate < 1.0)) {
    throw std::invalid_argument("gcn: dropout must be in [0, 1)");
  }
  if (!(sigmoid_lo < sigmoid_hi)) throw std::invalid_argument("gcn: lo must be < hi");
  if (train.epochs < 1) throw std::invalid_argument("gcn: epochs must be >= 1");
  if (train.batch_size < 1) throw std::invalid_argument("gcn: batch must be >= 1");
  if (!(train.lr0 > 0.0)) throw std::invalid_argument("gcn: lr must be > 0");
  if (train.weight_decay < 0.0) throw std::invalid_argument("gcn: wd must be >= 0");
}

std::string GcnConfig::to_text() const {
  std::string fc;
  for (std::size_t i = 0; i < fc_hidden_dims.size(); ++i) {
    if (i) fc += 'x';
    fc += std::to_string(fc_hidden_dims[i]);
  }
  if (fc.empty()) fc = "none";
  std::string s;
  s += "layers=" + std::to_string(num_gc_layers);
  s += " node_dim=" + std::to_string(node_dim);
  s += " fc=" + fc;
  s += std::string(" head=") + (output_head == OutputHead::kRegression ? "regression" : "classification");
  s += " dropout=" + format_double(train.dropout_rate);
  s += " lr=" + format_double(train.lr0);
  s += " wd=" + format_double(train.weight_decay);
  s += std::string(" decay=") + (train.decay_mode == WeightDecayMode::kDecoupled ? "decoupled" : "l2");
  s += " epochs=" + std::to_string(train.epochs);
  s += " batch=" + std::to_string(train.batch_size);
  s += " lo=" + format_double(sigmoid_lo);
  s += " hi=" + format_double(sigmoid_hi);
  s += " threshold=" + format_double(classifier_threshold);
  s += std::string(" norm=") + (adjacency_norm == AdjacencyNorm::kRowMean ? "row" : "symmetric");
  return s;
}

void apply_override(GcnConfig& cfg, std::string_view key, std::string_view value) {
  auto as_int = [&] { return static_cast<int>(parse_integer(value, key)); };
  if (key == "layers") {
    cfg.num_gc_layers = as_int();
  } else if (key == "node_dim") {
    cfg.node_dim = as_int();
  } else if (key == "fc") {
    cfg.fc_hidden_dims.clear();
    if (value != "none")
      for (auto part : split(value, 'x')) cfg.fc_hidden_dims.push_back(static_cast<int>(parse_integer(part, key)));
  } else if (key == "head") {
    if (value == "regression") {
      cfg.output_head = OutputHead::kRegression;
    } else if (value == "classification") {
      cfg.output_head = OutputHead::kClassification;
    } else {
      throw ParseError("head must be regression or classification");
    }
  } else if (key == "dropout") {
    cfg.train.dropout_rate = parse_double(value, key);
  } else if (key == "lr") {
    cfg.train.lr0 = parse_double(value, key);
  } else if (key == "wd") {
    cfg.train.weight_decay = parse_double(value, key);
  } else if (key == "decay") {
    if (value == "decoupled") {
      cfg.train.decay_mode = WeightDecayMode::kDecoupled;
    } else if (value == "l2") {
      cfg.train.decay_mode = WeightDecayMode::kL2;
    } else {
      throw ParseError("decay must be decoupled or l2");
    }
  } else if (key == "epochs") {
    cfg.train.epochs = as_int();
  } else if (key == "batch") {
    cfg.train.batch_size = as_int();
  } else if (key == "lo") {
    cfg.sigmoid_lo = parse_double(value, key);
  } else if (key == "hi") {
    cfg.sigmoid_hi = parse_double(value, key);
  } else if (key == "threshold") {
    cfg.classifier_threshold = parse_double(value, key);
  } else if (key == "norm") {
    if (value == "row") {
      cfg.adjacency_norm = AdjacencyNorm::kRowMean;
    } else if (value == "symmetric") {
      cfg.adjacency_norm = AdjacencyNorm::kSymmetric;
    } else {
      throw ParseError("norm must be row or symmetric");
    }
  } else {
    throw ParseError("unknown predictor key '" + std::string(key) + "'");
  }
}

GcnConfig parse_gcn_config(std::string_view text, GcnConfig base) {
  for (auto token : split_whitespace(text)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value, got '" + std::string(token) + "'");
    apply_override(base, token.substr(0, eq), token.substr(eq + 1));
  }
  base.validate();
  return base;
}

int node_dim_for_samples(int num_samples) {
  static constexpr std::array<std::pair<int, int>, 6> kTable{{
      {43, 48}, {86, 72}, {129, 96}, {172, 144}, {334, 210}, {860, 320}}};
  if (num_samples <= kTable.front().first) return kTable.front().second;
  if (num_samples >= kTable.back().first) return kTable.back().second;
  for (std::size_t i = 1; i < kTable.size(); ++i) {
    const auto [n1, d1] = kTable[i];
    if (num_samples <= n1) {
      const auto [n0, d0] = kTable[i - 1];
      const double t = static_cast<double>(num_samples - n0) / static_cast<double>(n1 - n0);
      return static_cast<int>(std::lround(d0 + t * (d1 - d0)));
    }
  }
  return kTable.back().second;
}

// ---------------------------------------------------------------------------
// Model

double scaled_sigmoid(double z, double lo, double hi) {
  const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return lo + (hi - lo) * s;
}

Var forward_layer(Tape& tape, Var v, Var fwd_adj, Var bwd_adj, Var w_fwd, Var w_bwd) {
  const Var along = tape.relu(tape.matmul(fwd_adj, tape.matmul(v, w_fwd)));
  const Var against = tape.relu(tape.matmul(bwd_adj, tape.matmul(v, w_bwd)));
  return tape.affine(tape.add(along, against), 0.5, 0.0);
}

std::size_t gcn_parameter_count(const GcnConfig& cfg, std::size_t input_dim) {
  const auto d = static_cast<std::size_t>(cfg.node_dim);
  std::size_t n = input_dim * d + 2 * static_cast<std::size_t>(cfg.num_gc_layers) * d * d;
  std::size_t prev = d;
  for (int h : cfg.fc_hidden_dims) {
    n += prev * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
    prev = static_cast<std::size_t>(h);
  }
  return n + prev + 1;
}

GcnModel GcnModel::initialize(const GcnConfig& cfg, const OpVocabulary& vocab, std::uint64_t seed) {
  cfg.validate();
  GcnModel m(cfg, vocab);
  Rng rng(derive_seed(seed, 0x696e6974));
  const auto d = static_cast<std::size_t>(cfg.node_dim);
  m.params_.push_back({"input_proj", detail::he_uniform(vocab.size(), d, rng)});
  for (int l = 0; l < cfg.num_gc_layers; ++l) {
    m.params_.push_back({"gc" + std::to_string(l) + ".w_fwd", detail::he_uniform(d, d, rng)});
    m.params_.push_back({"gc" + std::to_string(l) + ".w_bwd", detail::he_uniform(d, d, rng)});
  }
  std::size_t prev = d;
  for (std::size_t k = 0; k < cfg.fc_hidden_dims.size(); ++k) {
    const auto h = static_cast<std::size_t>(cfg.fc_hidden_dims[k]);
    m.params_.push_back({"fc" + std::to_string(k) + ".w", detail::he_uniform(prev, h, rng)});
    m.params_.push_back({"fc" + std::to_string(k) + ".b", Tensor2(1, h)});
    prev = h;
  }
  m.params_.push_back({"out.w", detail::he_uniform(prev, 1, rng)});
  m.params_.push_back({"out.b", Tensor2(1, 1)});
  return m;
}

EncodedGraph GcnModel::encode(const ArchGraph& arch) const {
  return encode_graph(arch, vocab_, config_.adjacency_norm);
}

std::vector<Var> GcnModel::bind(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) vars.push_back(tape.parameter(i, params_[i].value));
  return vars;
}

Var GcnModel::forward_logit(Tape& tape, std::span<const Var> params, const EncodedGraph& g, bool training,
                            Rng& dropout_rng) const {
  if (g.features.cols() != vocab_.size()) {
    throw InvalidArchError("gcn: feature width " + std::to_string(g.features.cols()) +
                           " does not match vocabulary size " + std::to_string(vocab_.size()));
  }
  std::size_t p = 0;
  const Var fwd = tape.constant(g.fwd_adj);
  const Var bwd = tape.constant(g.bwd_adj);
  Var v = tape.matmul(tape.constant(g.features), params[p++]);
  for (int l = 0; l < config_.num_gc_layers; ++l) {
    v = forward_layer(tape, v, fwd, bwd, params[p], params[p + 1]);
    p += 2;
  }
  Var h = tape.mean_rows(v);
  for (std::size_t k = 0; k < config_.fc_hidden_dims.size(); ++k) {
    h = tape.relu(tape.add(tape.matmul(h, params[p]), params[p + 1]));
    h = tape.dropout(h, config_.train.dropout_rate, dropout_rng, training);
    p += 2;
  }
  return tape.add(tape.matmul(h, params[p]), params[p + 1]);
}

Var GcnModel::forward_head(Tape& tape, std::span<const Var> params, const EncodedGraph& g, bool training,
                           Rng& dropout_rng) const {
  const Var z = forward_logit(tape, params, g, training, dropout_rng);
  if (config_.output_head == OutputHead::kClassification) return z;
  return tape.affine(tape.sigmoid(z), config_.sigmoid_hi - config_.sigmoid_lo, config_.sigmoid_lo);
}

double GcnModel::logit(const EncodedGraph& g) const {
  Tape tape;
  Rng unused(0);
  const auto params = bind(tape);
  return tape.value(forward_logit(tape, params, g, false, unused))(0, 0);
}

double GcnModel::logit(const ArchGraph& arch) const { return logit(encode(arch)); }

double GcnModel::predict_accuracy(const EncodedGraph& g) const {
  if (config_.output_head != OutputHead::kRegression) {
    throw std::logic_error("predict_accuracy requires a regression head");
  }
  return scaled_sigmoid(logit(g), config_.sigmoid_lo, config_.sigmoid_hi);
}

double GcnModel::predict_accuracy(const ArchGraph& arch) const { return predict_accuracy(encode(arch)); }

double GcnModel::classify_quality(const ArchGraph& arch) const {
  if (config_.output_head != OutputHead::kClassification) {
    throw std::logic_error("classify_quality requires a classification head");
  }
  return scaled_sigmoid(logit(arch), 0.0, 1.0);
}

Checkpoint GcnModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.header = "kind=gcn vocab=";
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (i) ckpt.header += ',';
    ckpt.header += vocab_.name(static_cast<int>(i));
  }
  ckpt.header += ' ' + config_.to_text();
  ckpt.tensors = params_;
  return ckpt;
}

GcnModel GcnModel::from_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::string> vocab_names;
  GcnConfig cfg;
  bool is_gcn = false;
  for (auto token : split_whitespace(ckpt.header)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) throw CheckpointError("bad checkpoint header token");
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "kind") {
      is_gcn = value == "gcn";
    } else if (key == "vocab") {
      for (auto name : split(value, ',')) vocab_names.emplace_back(name);
    } else {
      apply_override(cfg, key, value);
    }
  }
  if (!is_gcn) throw CheckpointError("checkpoint does not hold a GCN predictor");
  GcnModel m = initialize(cfg, OpVocabulary(std::move(vocab_names)), 0);
  if (m.params_.size() != ckpt.tensors.size()) throw CheckpointError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    if (m.params_[i].name != ckpt.tensors[i].name || !m.params_[i].value.same_shape(ckpt.tensors[i].value)) {
      throw CheckpointError("checkpoint tensor '" + ckpt.tensors[i].name + "' does not match config");
    }
    m.params_[i].value = ckpt.tensors[i].value;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

GcnTrainResult train_gcn(const GcnConfig& cfg, const OpVocabulary& vocab, std::span<const LabeledSample> data,
                         std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("train_gcn: empty dataset");
  GcnModel model = GcnModel::initialize(cfg, vocab, seed);
  std::vector<EncodedGraph> inputs;
  std::vector<double> targets;
  inputs.reserve(data.size());
  for (const auto& s : data) {
    if (!(s.accuracy > 0.0 && s.accuracy <= 100.0)) {
      throw std::invalid_argument("train_gcn: accuracy must be in (0, 100], got " + format_double(s.accuracy));
    }
    inputs.push_back(model.encode(s.arch));
    targets.push_back(cfg.output_head == OutputHead::kRegression
                          ? s.accuracy
                          : (s.accuracy > cfg.classifier_threshold ? 1.0 : 0.0));
  }
  Rng rng(derive_seed(seed, 0x747261696e));
  auto losses = detail::fit(model, std::span<const EncodedGraph>(inputs), std::span<const double>(targets),
                            cfg.output_head, cfg.train, rng);
  return GcnTrainResult{std::move(model), std::move(losses)};
}

std::optional<double> TwoStagePredictor::predict(const ArchGraph& arch) const {
  if (classifier_.classify_quality(arch) < decision_) return std::nullopt;
  return regressor_.predict_accuracy(arch);
}

double TwoStagePredictor::ranking_score(const ArchGraph& arch) const {
  const auto p = predict(arch);
  return p ? *p : -std::numeric_limits<double>::infinity();
}

TwoStagePredictor train_two_stage(const GcnConfig& classifier_cfg, const GcnConfig& regressor_cfg,
                                  const OpVocabulary& vocab, std::span<const LabeledSample> data, double threshold,
                                  std::uint64_t seed) {
  GcnConfig ccfg = classifier_cfg;
  ccfg.output_head = OutputHead::kClassification;
  ccfg.classifier_threshold = threshold;
  GcnModel classifier = train_gcn(ccfg, vocab, data, derive_seed(seed, 1)).model;

  std::vector<LabeledSample> accurate;
  for (const auto& s : data)
    if (s.accuracy > threshold) accurate.push_back(s);
  if (accurate.size() < 2) accurate.assign(data.begin(), data.end());
  GcnConfig rcfg = regressor_cfg;
  rcfg.output_head = OutputHead::kRegression;
  GcnModel regressor = train_gcn(rcfg, vocab, accurate, derive_seed(seed, 2)).model;
  return TwoStagePredictor(std::move(classifier), std::move(regressor));
}

// ---------------------------------------------------------------------------
// Model selection

CvResult cross_validate(const OpVocabulary& vocab, std::span<const LabeledSample> data,
                        std::span<const GcnConfig> grid, const CvProtocol& protocol, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty config grid");
  if (data.size() < 3) throw std::invalid_argument("cross_validate: need at least 3 samples");
  if (protocol.repeats < 1) throw std::invalid_argument("cross_validate: repeats must be >= 1");

  const std::size_t n = data.size();
  auto holdout = static_cast<std::size_t>(std::lround(protocol.holdout_fraction * static_cast<double>(n)));
  holdout = std::clamp<std::size_t>(holdout, 1, n - 1);

  std::vector<std::vector<std::size_t>> splits;
  Rng split_rng(derive_seed(seed, 0x73706c6974));
  for (int r = 0; r < protocol.repeats; ++r) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    split_rng.shuffle(std::span<std::size_t>(idx));
    splits.push_back(std::move(idx));
  }

  CvResult result;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    std::vector<double> mses;
    for (int r = 0; r < protocol.repeats; ++r) {
      const auto& idx = splits[static_cast<std::size_t>(r)];
      std::vector<LabeledSample> train_set, val_set;
      for (std::size_t k = 0; k < n; ++k) (k < holdout ? val_set : train_set).push_back(data[idx[k]]);
      const GcnModel m = train_gcn(grid[c], vocab, train_set, derive_seed(seed, 1000 * c + r)).model;
      std::vector<double> pred, truth;
      for (const auto& s : val_set) {
        pred.push_back(m.predict_accuracy(s.arch));
        truth.push_back(s.accuracy);
      }
      mses.push_back(mse(pred, truth));
    }
    const double mean = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(mses.size());
    double var = 0.0;
    for (double m : mses) var += (m - mean) * (m - mean);
    const double sd = mses.size() > 1 ? std::sqrt(var / static_cast<double>(mses.size() - 1)) : 0.0;
    result.scores.push_back({grid[c], mean, sd});
    if (c == 0 || mean < result.scores[result.best_index].mean_mse) result.best_index = c;
  }
  result.best = grid[result.best_index];
  return result;
}

GcnConfig grow_for_full_data(const GcnConfig& cfg, std::size_t input_dim, double factor) {
  const double target = factor * static_cast<double>(gcn_parameter_count(cfg, input_dim));
  GcnConfig grown = cfg;
  while (static_cast<double>(gcn_parameter_count(grown, input_dim)) < target) ++grown.node_dim;
  return grown;
}

GcnModel select_and_train(const OpVocabulary& vocab, std::span<const LabeledSample> data,
                          std::span<const GcnConfig> grid, const CvProtocol& protocol, double growth,
                          std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("select_and_train: empty config grid");
  GcnConfig chosen = grid.front();
  if (grid.size() > 1) chosen = cross_validate(vocab, data, grid, protocol, derive_seed(seed, 7)).best;
  if (growth > 1.0) chosen = grow_for_full_data(chosen, vocab.size(), growth);
  return train_gcn(chosen, vocab, data, derive_seed(seed, 8)).model;
}

}  // namespace npnas
