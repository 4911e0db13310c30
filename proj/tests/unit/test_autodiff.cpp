// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "npnas/autodiff.hpp"
#include "npnas/checkpoint.hpp"
#include "npnas/optim.hpp"

using namespace npnas;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 t(r, c);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Central differences of a scalar function of one tensor.
Tensor2 numeric_grad(const std::function<double(const Tensor2&)>& f, Tensor2 x, double eps = 1e-6) {
  Tensor2 g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

double max_rel_err(const Tensor2& a, const Tensor2& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    worst = std::max(worst, scale < 1e-8 ? d : d / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul") {
  CHECK(matmul(Tensor2::identity(2), Tensor2{{3, 4}, {5, 6}}) == Tensor2{{3, 4}, {5, 6}});
  CHECK(matmul(Tensor2{{1, 2}, {3, 4}}, Tensor2{{5, 6}, {7, 8}}) == Tensor2{{19, 22}, {43, 50}});
  CHECK_THROWS_AS(matmul(Tensor2(2, 3), Tensor2(2, 3)), ShapeError);

  Rng rng(1);
  const Tensor2 a = random_tensor(3, 4, rng), b = random_tensor(3, 5, rng), c = random_tensor(4, 5, rng);
  const Tensor2 tn = matmul_tn(a, b), ref_tn = matmul(a.transposed(), b);
  const Tensor2 nt = matmul_nt(b, c), ref_nt = matmul(b, c.transposed());
  for (std::size_t i = 0; i < tn.size(); ++i) CHECK(tn[i] == doctest::Approx(ref_tn[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < nt.size(); ++i) CHECK(nt[i] == doctest::Approx(ref_nt[i]).epsilon(1e-14));
}

TEST_CASE("gradient of sum(A*B) wrt A") {
  Rng rng(2);
  const Tensor2 a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
  Tape tape;
  const Var va = tape.parameter(0, a);
  const Var loss = tape.sum(tape.matmul(va, tape.constant(b)));
  const auto grads = tape.backward(loss, 1);
  const auto f = [&](const Tensor2& x) { return matmul(x, b).sum(); };
  CHECK(max_rel_err(grads[0], numeric_grad(f, a)) < 1e-6);
}

TEST_CASE("elementwise primitives") {
  Tape tape;
  const Var x = tape.constant(Tensor2{{-1, 0, 2}});
  CHECK(tape.value(tape.relu(x)) == Tensor2{{0, 0, 2}});
  CHECK(tape.value(tape.sigmoid(tape.constant(Tensor2{{0}})))(0, 0) == 0.5);
  CHECK(tape.value(tape.mean_rows(tape.constant(Tensor2(4, 3, 1.0)))) == Tensor2(1, 3, 1.0));
  CHECK(tape.value(tape.affine(x, 2.0, 1.0)) == Tensor2{{-1, 1, 5}});

  Rng rng(0);
  CHECK(tape.value(tape.dropout(x, 0.5, rng, false)) == tape.value(x));
  CHECK_THROWS_AS(tape.add(x, tape.constant(Tensor2(2, 2))), ShapeError);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(7);
  const Tensor2 w = random_tensor(3, 3, rng), x = random_tensor(4, 3, rng), t = random_tensor(1, 3, rng);
  Tensor2 labels(1, 3);
  labels[0] = 1;
  labels[2] = 1;
  auto build = [&](Tape& tape, Var vw) {
    const Var h = tape.relu(tape.matmul(tape.constant(x), vw));
    const Var s = tape.sigmoid(tape.affine(h, 1.5, -0.2));
    const Var m = tape.mean_rows(tape.add(s, h));
    return tape.add(tape.mse(m, t), tape.bce_with_logits(m, labels));
  };
  Tape tape;
  const auto grads = tape.backward(build(tape, tape.parameter(0, w)), 1);
  const auto f = [&](const Tensor2& wv) {
    Tape t2;
    return t2.value(build(t2, t2.constant(wv)))(0, 0);
  };
  CHECK(max_rel_err(grads[0], numeric_grad(f, w)) < 1e-5);
}

TEST_CASE("backward details") {
  Rng rng(3);
  const Tensor2 w = random_tensor(2, 5, rng);
  Tape tape;
  const Var vw = tape.parameter(0, w);
  const Var loss = tape.sum(vw);
  const auto g1 = tape.backward(loss, 2);
  CHECK(g1[0] == Tensor2(2, 5, 1.0));
  CHECK(g1[1].empty());
  CHECK(tape.backward(loss, 2)[0] == g1[0]);
  CHECK(tape.parameter(0, w).id == vw.id);
  CHECK_THROWS(tape.backward(tape.relu(vw), 1));
}

TEST_CASE("non-finite values are reported") {
  Tape tape;
  CHECK_THROWS_AS(tape.constant(Tensor2{{std::nan("")}}), NonFiniteError);
  const Var big = tape.constant(Tensor2{{1e300}});
  CHECK_THROWS_AS(tape.matmul(big, big), NonFiniteError);
}

TEST_CASE("adam") {
  ParameterSet p{{"w", Tensor2{{1.0}}}};
  AdamState s;
  std::vector<Tensor2> zero{Tensor2{{0.0}}};
  adam_step(p, zero, s, 0.1, 0.0);
  CHECK(p[0].value(0, 0) == 1.0);
  CHECK(s.step == 1);

  ParameterSet q{{"w", Tensor2{{0.0}}}};
  AdamState sq;
  std::vector<Tensor2> one{Tensor2{{1.0}}};
  adam_step(q, one, sq, 0.1, 0.0);
  CHECK(q[0].value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

  ParameterSet d{{"w", Tensor2{{1.0}}}};
  AdamState sd;
  adam_step(d, zero, sd, 0.1, 0.001);
  CHECK(d[0].value(0, 0) == doctest::Approx(0.9999).epsilon(1e-12));

  ParameterSet l2{{"w", Tensor2{{1.0}}}};
  AdamState sl;
  adam_step(l2, zero, sl, 0.1, 0.001, WeightDecayMode::kL2);
  CHECK(l2[0].value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));

  std::vector<Tensor2> bad{Tensor2{{std::numeric_limits<double>::infinity()}}};
  CHECK_THROWS_AS(adam_step(p, bad, s, 0.1, 0.0), DivergenceError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 0.3) == 0.3);
  CHECK(cosine_lr(100, 100, 0.3) == doctest::Approx(0.0));
  CHECK(cosine_lr(50, 100, 0.3) == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c{"kind=test", {{"a", Tensor2{{1.5, -2}, {0.1, 1e-300}}}, {"b", Tensor2(1, 3, 7.0)}}};
  std::stringstream ss;
  write_checkpoint(ss, c);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "NPCK");
  const Checkpoint r = read_checkpoint(ss);
  CHECK(r.header == c.header);
  REQUIRE(r.tensors.size() == 2);
  CHECK(r.tensors[0].name == "a");
  CHECK(r.tensors[0].value == c.tensors[0].value);
  CHECK(r.tensors[1].value == c.tensors[1].value);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
  std::stringstream wrong("XXXX");
  CHECK_THROWS_AS(read_checkpoint(wrong), CheckpointError);
}
