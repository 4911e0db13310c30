// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace npnas {

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

void adam_step(ParameterSet& params, std::span<const Tensor2> grads, AdamState& state, double lr,
               double weight_decay, WeightDecayMode mode) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i].value)) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params[i].name);
    }
    for (double g : grads[i].data()) {
      if (!std::isfinite(g)) throw DivergenceError("adam_step: non-finite gradient for " + params[i].name);
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.rows(), p.value.cols());
      state.second_moment.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double decay = mode == WeightDecayMode::kDecoupled ? 1.0 - lr * weight_decay : 1.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.data();
    const auto& g = grads[i].data();
    auto& m = state.first_moment[i].data();
    auto& v = state.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      double gk = g[k];
      if (mode == WeightDecayMode::kL2) gk += weight_decay * p[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] = p[k] * decay - lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
  if (step == total_steps) return 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace npnas
