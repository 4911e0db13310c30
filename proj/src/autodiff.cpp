// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace npnas {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace

Var Tape::push(Node node, const char* name) {
  require_finite(node.value, name);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor2 value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::parameter(std::size_t slot, const Tensor2& value) {
  if (slot < slot_nodes_.size() && slot_nodes_[slot] >= 0) {
    return Var{static_cast<std::uint32_t>(slot_nodes_[slot])};
  }
  Node n;
  n.slot = static_cast<std::int64_t>(slot);
  n.value = value;
  Var v = push(std::move(n), "parameter");
  if (slot >= slot_nodes_.size()) slot_nodes_.resize(slot + 1, -1);
  slot_nodes_[slot] = v.id;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = npnas::matmul(value(a), value(b));
  return push(std::move(n), "matmul");
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = value(a);
  n.value.add_scaled(value(b));
  return push(std::move(n), "add");
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n), "relu");
}

Var Tape::sigmoid(Var x) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data()) v = stable_sigmoid(v);
  return push(std::move(n), "sigmoid");
}

Var Tape::affine(Var x, double scale, double shift) {
  Node n;
  n.op = Op::kAffine;
  n.a = x.id;
  n.scalar = scale;
  n.value = value(x);
  for (double& v : n.value.data()) v = scale * v + shift;
  return push(std::move(n), "affine");
}

Var Tape::mean_rows(Var x) {
  const Tensor2& in = value(x);
  if (in.rows() == 0) throw ShapeError("mean_rows: empty input");
  Node n;
  n.op = Op::kMeanRows;
  n.a = x.id;
  n.value = Tensor2(1, in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r)
    for (std::size_t c = 0; c < in.cols(); ++c) n.value(0, c) += in(r, c);
  const double inv = 1.0 / static_cast<double>(in.rows());
  for (double& v : n.value.data()) v *= inv;
  return push(std::move(n), "mean_rows");
}

Var Tape::dropout(Var x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  Node n;
  n.op = Op::kDropout;
  n.a = x.id;
  const Tensor2& in = value(x);
  n.aux = Tensor2(in.rows(), in.cols());
  n.value = in;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    n.aux[i] = m;
    n.value[i] *= m;
  }
  return push(std::move(n), "dropout");
}

Var Tape::sum(Var x) {
  Node n;
  n.op = Op::kSum;
  n.a = x.id;
  n.value = Tensor2(1, 1, value(x).sum());
  return push(std::move(n), "sum");
}

Var Tape::mse(Var prediction, const Tensor2& target) {
  const Tensor2& p = value(prediction);
  require_same_shape(p, target, "mse");
  Node n;
  n.op = Op::kMse;
  n.a = prediction.id;
  n.aux = target;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - target[i];
    s += d * d;
  }
  n.value = Tensor2(1, 1, s / static_cast<double>(p.size()));
  return push(std::move(n), "mse");
}

Var Tape::bce_with_logits(Var logits, const Tensor2& target) {
  const Tensor2& z = value(logits);
  require_same_shape(z, target, "bce_with_logits");
  Node n;
  n.op = Op::kBceLogits;
  n.a = logits.id;
  n.aux = target;
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    s += std::max(zi, 0.0) - zi * target[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  n.value = Tensor2(1, 1, s / static_cast<double>(z.size()));
  return push(std::move(n), "bce_with_logits");
}

std::vector<Tensor2> Tape::backward_all(Var loss) const {
  const Tensor2& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(lv));
  }
  std::vector<Tensor2> grads(loss.id + 1);
  grads[loss.id] = Tensor2(1, 1, 1.0);

  auto accumulate = [&grads](std::uint32_t id, const Tensor2& g) {
    if (grads[id].empty()) {
      grads[id] = g;
    } else {
      grads[id].add_scaled(g);
    }
  };

  for (std::int64_t id = loss.id; id >= 0; --id) {
    const Tensor2& g = grads[id];
    if (g.empty()) continue;
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        accumulate(n.a, matmul_nt(g, nodes_[n.b].value));
        accumulate(n.b, matmul_tn(nodes_[n.a].value, g));
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kRelu: {
        Tensor2 d = g;
        for (std::size_t i = 0; i < d.size(); ++i)
          if (!(n.value[i] > 0.0)) d[i] = 0.0;
        accumulate(n.a, d);
        break;
      }
      case Op::kSigmoid: {
        Tensor2 d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
        accumulate(n.a, d);
        break;
      }
      case Op::kAffine: {
        Tensor2 d = g;
        for (double& v : d.data()) v *= n.scalar;
        accumulate(n.a, d);
        break;
      }
      case Op::kMeanRows: {
        const Tensor2& in = nodes_[n.a].value;
        Tensor2 d(in.rows(), in.cols());
        const double inv = 1.0 / static_cast<double>(in.rows());
        for (std::size_t r = 0; r < in.rows(); ++r)
          for (std::size_t c = 0; c < in.cols(); ++c) d(r, c) = g(0, c) * inv;
        accumulate(n.a, d);
        break;
      }
      case Op::kDropout: {
        Tensor2 d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.aux[i];
        accumulate(n.a, d);
        break;
      }
      case Op::kSum: {
        const Tensor2& in = nodes_[n.a].value;
        accumulate(n.a, Tensor2(in.rows(), in.cols(), g(0, 0)));
        break;
      }
      case Op::kMse: {
        const Tensor2& p = nodes_[n.a].value;
        Tensor2 d(p.rows(), p.cols());
        const double k = 2.0 * g(0, 0) / static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) d[i] = k * (p[i] - n.aux[i]);
        accumulate(n.a, d);
        break;
      }
      case Op::kBceLogits: {
        const Tensor2& z = nodes_[n.a].value;
        Tensor2 d(z.rows(), z.cols());
        const double k = g(0, 0) / static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) d[i] = k * (stable_sigmoid(z[i]) - n.aux[i]);
        accumulate(n.a, d);
        break;
      }
    }
  }
  return grads;
}

std::vector<Tensor2> Tape::backward(Var loss, std::size_t num_slots) const {
  std::vector<Tensor2> node_grads = backward_all(loss);
  std::vector<Tensor2> out(num_slots);
  for (std::size_t slot = 0; slot < num_slots && slot < slot_nodes_.size(); ++slot) {
    const std::int64_t id = slot_nodes_[slot];
    if (id < 0) continue;
    const Tensor2& pv = nodes_[id].value;
    if (static_cast<std::size_t>(id) < node_grads.size() && !node_grads[id].empty()) {
      out[slot] = std::move(node_grads[id]);
    } else {
      out[slot] = Tensor2(pv.rows(), pv.cols());
    }
  }
  for (const Tensor2& g : out) require_finite(g, "backward");
  return out;
}

}  // namespace npnas
