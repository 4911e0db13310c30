// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "npnas/rng.hpp"
#include "npnas/tensor.hpp"

namespace npnas {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Reverse-mode tape over Tensor2 values.
///
/// Every primitive appends one node whose inputs were recorded before it, so
/// the node vector is already a topological order and backward() is a single
/// reverse sweep. Parameters enter as leaves tagged with a slot index; the
/// gradient of each slot is returned by backward(). The tape itself is never
/// mutated by backward(), so repeated calls return identical gradients.
class Tape {
 public:
  Tape() = default;

  Var constant(Tensor2 value);
  /// Leaf bound to parameter `slot`. Registering the same slot twice on one
  /// tape returns the existing leaf.
  Var parameter(std::size_t slot, const Tensor2& value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var relu(Var x);
  Var sigmoid(Var x);
  /// scale * x + shift, elementwise.
  Var affine(Var x, double scale, double shift);
  /// Mean over rows: [n x d] -> [1 x d].
  Var mean_rows(Var x);
  /// Inverted dropout. Identity when !training or rate == 0.
  Var dropout(Var x, double rate, Rng& rng, bool training);
  /// Sum of all elements -> [1 x 1].
  Var sum(Var x);
  /// Mean squared error against a constant target -> [1 x 1].
  Var mse(Var prediction, const Tensor2& target);
  /// Binary cross entropy of sigmoid(logits) against 0/1 targets -> [1 x 1].
  Var bce_with_logits(Var logits, const Tensor2& target);

  const Tensor2& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradients of the scalar `loss` with respect to every parameter slot in
  /// [0, num_slots). Slots not used on this tape get an empty tensor.
  std::vector<Tensor2> backward(Var loss, std::size_t num_slots) const;

  /// Gradient of `loss` with respect to every node (index = Var::id).
  std::vector<Tensor2> backward_all(Var loss) const;

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kAdd,
    kRelu,
    kSigmoid,
    kAffine,
    kMeanRows,
    kDropout,
    kSum,
    kMse,
    kBceLogits,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double scalar = 0.0;
    std::int64_t slot = -1;
    Tensor2 value;
    Tensor2 aux;  // dropout mask or loss target
  };

  Var push(Node node, const char* name);

  std::vector<Node> nodes_;
  std::vector<std::int64_t> slot_nodes_;
};

}  // namespace npnas
