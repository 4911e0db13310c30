// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npnas/tensor.hpp"

namespace npnas {

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

/// Ordered, named parameter tensors. The position of a tensor is its tape slot.
using ParameterSet = std::vector<NamedTensor>;

std::size_t parameter_count(const ParameterSet& params);

/// Raised when a gradient fed to the optimizer is not finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
};

enum class WeightDecayMode { kDecoupled, kL2 };

/// One Adam update with bias correction. In decoupled mode the decay is applied
/// as params *= (1 - lr * weight_decay) before the Adam delta; in L2 mode
/// weight_decay * param is added to the gradient.
void adam_step(ParameterSet& params, std::span<const Tensor2> grads, AdamState& state, double lr,
               double weight_decay, WeightDecayMode mode = WeightDecayMode::kDecoupled);

/// lr0 * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0);

}  // namespace npnas
