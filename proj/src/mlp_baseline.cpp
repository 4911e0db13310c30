// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/mlp_baseline.hpp"

#include "trainer.hpp"

namespace npnas {

void MlpConfig::validate() const {
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("mlp: hidden sizes must be >= 1");
  if (max_nodes < 2) throw std::invalid_argument("mlp: max_nodes must be >= 2");
  if (!(sigmoid_lo < sigmoid_hi)) throw std::invalid_argument("mlp: lo must be < hi");
  if (!(train.dropout_rate >= 0.0 && train.dropout_rate < 1.0)) {
    throw std::invalid_argument("mlp: dropout must be in [0, 1)");
  }
}

MlpModel MlpModel::initialize(const MlpConfig& cfg, const OpVocabulary& vocab, std::uint64_t seed) {
  cfg.validate();
  MlpModel m(cfg, vocab);
  Rng rng(derive_seed(seed, 0x6d6c70));
  const std::size_t n = static_cast<std::size_t>(cfg.max_nodes);
  std::size_t prev = n * vocab.size() + n * (n - 1) / 2;
  for (std::size_t k = 0; k < cfg.hidden_dims.size(); ++k) {
    const auto h = static_cast<std::size_t>(cfg.hidden_dims[k]);
    m.params_.push_back({"fc" + std::to_string(k) + ".w", detail::he_uniform(prev, h, rng)});
    m.params_.push_back({"fc" + std::to_string(k) + ".b", Tensor2(1, h)});
    prev = h;
  }
  m.params_.push_back({"out.w", detail::he_uniform(prev, 1, rng)});
  m.params_.push_back({"out.b", Tensor2(1, 1)});
  return m;
}

Tensor2 MlpModel::encode(const ArchGraph& arch) const {
  auto flat = flatten_for_mlp(arch, vocab_, config_.max_nodes);
  const std::size_t len = flat.size();
  return Tensor2(1, len, std::move(flat));
}

std::vector<Var> MlpModel::bind(Tape& tape) const {
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params_.size(); ++i) vars.push_back(tape.parameter(i, params_[i].value));
  return vars;
}

Var MlpModel::forward_head(Tape& tape, std::span<const Var> params, const Tensor2& x, bool training,
                           Rng& rng) const {
  Var h = tape.constant(x);
  std::size_t p = 0;
  for (std::size_t k = 0; k < config_.hidden_dims.size(); ++k) {
    h = tape.relu(tape.add(tape.matmul(h, params[p]), params[p + 1]));
    h = tape.dropout(h, config_.train.dropout_rate, rng, training);
    p += 2;
  }
  const Var z = tape.add(tape.matmul(h, params[p]), params[p + 1]);
  return tape.affine(tape.sigmoid(z), config_.sigmoid_hi - config_.sigmoid_lo, config_.sigmoid_lo);
}

double MlpModel::predict_accuracy(const ArchGraph& arch) const {
  Tape tape;
  Rng unused(0);
  const auto params = bind(tape);
  return tape.value(forward_head(tape, params, encode(arch), false, unused))(0, 0);
}

MlpTrainResult train_mlp(const MlpConfig& cfg, const OpVocabulary& vocab, std::span<const LabeledSample> data,
                         std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("train_mlp: empty dataset");
  MlpModel model = MlpModel::initialize(cfg, vocab, seed);
  std::vector<Tensor2> inputs;
  std::vector<double> targets;
  for (const auto& s : data) {
    inputs.push_back(model.encode(s.arch));
    targets.push_back(s.accuracy);
  }
  Rng rng(derive_seed(seed, 0x747261696e));
  auto losses = detail::fit(model, std::span<const Tensor2>(inputs), std::span<const double>(targets),
                            OutputHead::kRegression, cfg.train, rng);
  return MlpTrainResult{std::move(model), std::move(losses)};
}

}  // namespace npnas
