// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npnas/gcn_predictor.hpp"

namespace npnas {

struct MlpConfig {
  std::vector<int> hidden_dims{128, 128};
  TrainSettings train;
  int max_nodes = kCellMaxNodes;
  double sigmoid_lo = 10.0;
  double sigmoid_hi = 100.0;

  void validate() const;
};

/// Regressor over the flattened one-hot + upper-triangle encoding.
class MlpModel {
 public:
  static MlpModel initialize(const MlpConfig& cfg, const OpVocabulary& vocab, std::uint64_t seed);

  const MlpConfig& config() const noexcept { return config_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  Tensor2 encode(const ArchGraph& arch) const;
  std::vector<Var> bind(Tape& tape) const;
  Var forward_head(Tape& tape, std::span<const Var> params, const Tensor2& x, bool training, Rng& rng) const;
  double predict_accuracy(const ArchGraph& arch) const;

 private:
  MlpModel(MlpConfig cfg, OpVocabulary vocab) : config_(std::move(cfg)), vocab_(std::move(vocab)) {}

  MlpConfig config_;
  OpVocabulary vocab_;
  ParameterSet params_;
};

struct MlpTrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;
};

MlpTrainResult train_mlp(const MlpConfig& cfg, const OpVocabulary& vocab, std::span<const LabeledSample> data,
                         std::uint64_t seed);

}  // namespace npnas
