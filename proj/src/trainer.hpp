// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "npnas/autodiff.hpp"
#include "npnas/gcn_predictor.hpp"
#include "npnas/optim.hpp"
#include "npnas/rng.hpp"

namespace npnas::detail {

/// Mini-batch training loop shared by the GCN and MLP predictors.
///
/// Model must expose bind(Tape&), forward_head(Tape&, span<const Var>,
/// const Input&, bool training, Rng&) and parameters(). For classification
/// `targets` holds 0/1 labels and forward_head returns logits.
template <typename Model, typename Input>
std::vector<double> fit(Model& model, std::span<const Input> inputs, std::span<const double> targets,
                        OutputHead head, const TrainSettings& settings, Rng& rng) {
  const std::size_t n = inputs.size();
  const auto batch = static_cast<std::size_t>(std::max(1, settings.batch_size));
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;
  const auto total_steps = static_cast<std::int64_t>(batches_per_epoch) * settings.epochs;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;
  std::vector<double> epoch_loss;
  epoch_loss.reserve(static_cast<std::size_t>(settings.epochs));
  std::int64_t step = 0;

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t end = std::min(n, start + batch);
        Tape tape;
        const std::vector<Var> params = model.bind(tape);
        Var total{};
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t i = order[k];
          const Var out = model.forward_head(tape, params, inputs[i], true, rng);
          const Tensor2 target(1, 1, targets[i]);
          const Var loss = head == OutputHead::kRegression ? tape.mse(out, target) : tape.bce_with_logits(out, target);
          total = k == start ? loss : tape.add(total, loss);
        }
        const Var mean_loss = tape.affine(total, 1.0 / static_cast<double>(end - start), 0.0);
        loss_sum += tape.value(mean_loss)(0, 0) * static_cast<double>(end - start);
        const std::vector<Tensor2> grads = tape.backward(mean_loss, model.parameters().size());
        const double lr = cosine_lr(step, total_steps, settings.lr0);
        adam_step(model.parameters(), grads, adam, lr, settings.weight_decay, settings.decay_mode);
        ++step;
      }
    } catch (const NonFiniteError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  return epoch_loss;
}

/// He-style uniform fan-in initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
inline Tensor2 he_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor2 w(fan_in, fan_out);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace npnas::detail
