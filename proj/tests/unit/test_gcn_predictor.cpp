// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "npnas/benchmark_oracle.hpp"
#include "npnas/gcn_predictor.hpp"
#include "npnas/metrics.hpp"
#include "npnas/mlp_baseline.hpp"

using namespace npnas;

namespace {

GcnConfig small_config(OutputHead head = OutputHead::kRegression) {
  GcnConfig c;
  c.num_gc_layers = 2;
  c.node_dim = 16;
  c.fc_hidden_dims = {16};
  c.output_head = head;
  c.train.lr0 = 1e-2;
  c.train.epochs = 100;
  c.train.dropout_rate = 0.0;
  c.train.weight_decay = 0.0;
  return c;
}

Tensor2 relu(Tensor2 t) {
  for (double& v : t.data()) v = v > 0 ? v : 0;
  return t;
}

// Zero every parameter and set the output bias, so the logit is `z` for any input.
void pin_logit(GcnModel& m, double z) {
  for (auto& p : m.parameters()) p.value = Tensor2(p.value.rows(), p.value.cols());
  m.parameters().back().value(0, 0) = z;
}

ArchGraph random_dag(int n, Rng& rng) {
  ArchGraph g(std::vector<int>(static_cast<std::size_t>(n), 0), std::vector<std::uint8_t>(static_cast<std::size_t>(n * n), 0));
  for (int i = 0; i < n; ++i) g.set_op(i, rng.below(4));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.set_edge(i, j, rng.bernoulli(0.4));
  return g;
}

}  // namespace

TEST_CASE("bidirectional layer") {
  Tape tape;
  const Var one = tape.constant(Tensor2{{1.0}});
  const Var v = tape.constant(Tensor2{{1, 0}});
  const Var w = tape.constant(Tensor2::identity(2));
  CHECK(tape.value(forward_layer(tape, v, one, one, w, w)) == Tensor2{{1, 0}});

  Rng rng(4);
  const ArchGraph g = random_dag(5, rng);
  auto [fwd, bwd] = build_normalized_adjacency(g);
  Tensor2 vv(5, 3), wf(3, 4), wb(3, 4);
  for (double& x : vv.data()) x = rng.uniform(-1, 1);
  for (double& x : wf.data()) x = rng.uniform(-1, 1);
  for (double& x : wb.data()) x = rng.uniform(-1, 1);
  const Var out = forward_layer(tape, tape.constant(vv), tape.constant(fwd), tape.constant(bwd), tape.constant(wf),
                                tape.constant(wb));
  // straight-line recomputation
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double a = 0, b = 0;
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t k = 0; k < 3; ++k) {
          a += fwd(i, j) * vv(j, k) * wf(k, c);
          b += bwd(i, j) * vv(j, k) * wb(k, c);
        }
      const double expect = 0.5 * std::max(a, 0.0) + 0.5 * std::max(b, 0.0);
      CHECK(std::abs(tape.value(out)(i, c) - expect) < 1e-12);
    }

  const Var same = forward_layer(tape, tape.constant(vv), tape.constant(fwd), tape.constant(fwd),
                                 tape.constant(wf), tape.constant(wf));
  const Tensor2 plain = relu(matmul(matmul(fwd, vv), wf));
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(std::abs(tape.value(same)[i] - plain[i]) < 1e-12);
}

TEST_CASE("output heads") {
  CHECK(scaled_sigmoid(0.0, 10, 100) == 55.0);
  CHECK(scaled_sigmoid(800.0, 10, 100) < 100.0 + 1e-9);
  CHECK(scaled_sigmoid(-800.0, 10, 100) >= 10.0);

  const auto vocab = OpVocabulary::synthetic();
  GcnModel reg = GcnModel::initialize(small_config(), vocab, 1);
  pin_logit(reg, 0.0);
  CHECK(reg.predict_accuracy(synthetic_template()) == 55.0);
  CHECK_THROWS(reg.classify_quality(synthetic_template()));

  GcnModel cls = GcnModel::initialize(small_config(OutputHead::kClassification), vocab, 1);
  pin_logit(cls, 0.0);
  CHECK(cls.classify_quality(synthetic_template()) == 0.5);
  CHECK_THROWS(cls.predict_accuracy(synthetic_template()));

  CHECK_THROWS_AS(reg.predict_accuracy(ArchGraph::chain({0, 1, 6})), InvalidArchError);
}

TEST_CASE("predictions are invariant to node relabeling") {
  const auto vocab = OpVocabulary::cell();
  const GcnModel m = GcnModel::initialize(GcnConfig::nasbench_regressor(), vocab, 3);
  Rng rng(5);
  const auto space = SearchSpace::cell();
  for (int t = 0; t < 5; ++t) {
    const ArchGraph g = space.sample(rng);
    const double base = m.predict_accuracy(g);
    std::vector<int> perm(static_cast<std::size_t>(g.num_nodes()));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    CHECK(std::abs(m.predict_accuracy(g.permuted(perm)) - base) < 1e-9);
  }
}

TEST_CASE("default configs") {
  const GcnConfig r = GcnConfig::nasbench_regressor();
  CHECK(r.num_gc_layers == 3);
  CHECK(r.fc_hidden_dims == std::vector<int>{128});
  CHECK(r.train.lr0 == 1e-4);
  CHECK(r.train.weight_decay == 1e-3);
  CHECK(r.train.dropout_rate == 0.1);
  CHECK(r.train.epochs == 300);
  CHECK(r.train.batch_size == 10);
  CHECK(r.node_dim == 144);

  GcnConfig c = GcnConfig::nasbench_classifier();
  CHECK(c.train.lr0 == 2e-4);
  CHECK(c.output_head == OutputHead::kClassification);
  c.train.lr0 = r.train.lr0;
  c.output_head = r.output_head;
  CHECK(c == r);

  const GcnConfig p = GcnConfig::proxyless_regressor();
  CHECK(p.num_gc_layers == 18);
  CHECK(p.node_dim == 96);
  CHECK(p.fc_hidden_dims == std::vector<int>{512, 128});
  CHECK(p.train.lr0 == 1e-3);
  CHECK(p.train.weight_decay == 1e-5);
}

TEST_CASE("config text") {
  const GcnConfig r = GcnConfig::proxyless_regressor();
  CHECK(parse_gcn_config(r.to_text()) == r);
  const GcnConfig o = parse_gcn_config("layers=2 fc=64x32 head=classification lr=0.01 norm=symmetric");
  CHECK(o.num_gc_layers == 2);
  CHECK(o.fc_hidden_dims == std::vector<int>{64, 32});
  CHECK(o.output_head == OutputHead::kClassification);
  CHECK(o.adjacency_norm == AdjacencyNorm::kSymmetric);
  CHECK_THROWS_AS(parse_gcn_config("layerz=2"), ParseError);
  CHECK_THROWS(parse_gcn_config("layers=0"));
  CHECK_THROWS(parse_gcn_config("lo=50 hi=40"));
}

TEST_CASE("node dim table") {
  CHECK(node_dim_for_samples(43) == 48);
  CHECK(node_dim_for_samples(86) == 72);
  CHECK(node_dim_for_samples(129) == 96);
  CHECK(node_dim_for_samples(172) == 144);
  CHECK(node_dim_for_samples(334) == 210);
  CHECK(node_dim_for_samples(860) == 320);
  CHECK(node_dim_for_samples(10) == 48);
  CHECK(node_dim_for_samples(5000) == 320);
  CHECK(node_dim_for_samples(150) == 119);
}

TEST_CASE("overfit a single sample") {
  const auto vocab = OpVocabulary::synthetic();
  GcnConfig cfg = small_config();
  cfg.train.epochs = 300;
  const std::vector<LabeledSample> data{{synthetic_template(), 80.0}};
  const auto res = train_gcn(cfg, vocab, data, 2);
  CHECK(res.epoch_loss.back() < res.epoch_loss.front());
  const auto third = [&](std::size_t k) {
    const std::size_t n = res.epoch_loss.size() / 3;
    return std::accumulate(res.epoch_loss.begin() + k * n, res.epoch_loss.begin() + (k + 1) * n, 0.0);
  };
  CHECK(third(0) > third(1));
  CHECK(third(1) > third(2));
  CHECK(std::abs(res.model.predict_accuracy(synthetic_template()) - 80.0) < 0.4);

  const auto mres = train_mlp(MlpConfig{{16}, cfg.train, 5}, vocab, data, 2);
  CHECK(std::abs(mres.model.predict_accuracy(synthetic_template()) - 80.0) < 0.4);
}

TEST_CASE("classifier separates above and below the median") {
  SyntheticSpec spec;
  spec.bad_fraction = 0.0;
  SyntheticOracle oracle(spec);
  Rng rng(9);
  std::vector<LabeledSample> data;
  for (int i = 0; i < 120; ++i) {
    const ArchGraph a = oracle.sample(rng);
    data.push_back({a, oracle.base_accuracy(a)});
  }
  std::vector<double> accs;
  for (const auto& s : data) accs.push_back(s.accuracy);
  std::nth_element(accs.begin(), accs.begin() + 60, accs.end());
  GcnConfig cfg = small_config(OutputHead::kClassification);
  cfg.train.epochs = 300;
  cfg.classifier_threshold = accs[60];
  const auto model = train_gcn(cfg, oracle.space().vocab(), data, 4).model;
  int correct = 0;
  for (const auto& s : data) correct += (model.classify_quality(s.arch) > 0.5) == (s.accuracy > cfg.classifier_threshold);
  CHECK(correct >= 114);

  std::array<bool, 120> pred{}, truth{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    pred[i] = model.classify_quality(data[i].arch) > 0.5;
    truth[i] = data[i].accuracy > cfg.classifier_threshold;
  }
  const auto rates = fnr_fpr(pred, truth);
  int tp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += truth[i] && pred[i];
    fn += truth[i] && !pred[i];
  }
  CHECK(rates.fnr == doctest::Approx(static_cast<double>(fn) / (fn + tp)));
}

TEST_CASE("training rejects bad labels and diverging runs") {
  const auto vocab = OpVocabulary::synthetic();
  const std::vector<LabeledSample> zero{{synthetic_template(), 0.0}};
  CHECK_THROWS(train_gcn(small_config(), vocab, zero, 1));
  const std::vector<LabeledSample> empty;
  CHECK_THROWS(train_gcn(small_config(), vocab, empty, 1));
  GcnConfig hot = small_config();
  hot.train.lr0 = 1e200;
  const std::vector<LabeledSample> ok{{synthetic_template(), 50.0}, {ArchGraph(synthetic_template()), 60.0}};
  CHECK_THROWS_AS(train_gcn(hot, vocab, ok, 1), DivergenceError);
}

TEST_CASE("two-stage cascade") {
  const auto vocab = OpVocabulary::synthetic();
  GcnModel cls = GcnModel::initialize(small_config(OutputHead::kClassification), vocab, 1);
  GcnModel reg = GcnModel::initialize(small_config(), vocab, 2);
  pin_logit(reg, 1.0);
  const ArchGraph a = synthetic_template();

  pin_logit(cls, std::log(0.9 / 0.1));
  const TwoStagePredictor pass(cls, reg);
  REQUIRE(pass.predict(a).has_value());
  CHECK(*pass.predict(a) == reg.predict_accuracy(a));

  pin_logit(cls, std::log(0.1 / 0.9));
  const TwoStagePredictor reject(cls, reg);
  CHECK_FALSE(reject.predict(a).has_value());
  CHECK(reject.ranking_score(a) == -std::numeric_limits<double>::infinity());
  CHECK(reject.ranking_score(a) < pass.ranking_score(a));
}

TEST_CASE("cross validation and growth") {
  SyntheticOracle oracle(SyntheticSpec{});
  const auto all = *oracle.domain();
  std::vector<LabeledSample> data;
  for (std::size_t i = 0; i < 60; ++i) data.push_back({all[i * 17], oracle.base_accuracy(all[i * 17])});
  GcnConfig a = small_config();
  a.train.epochs = 20;
  GcnConfig b = a;
  b.train.lr0 = 1e-7;
  const std::vector<GcnConfig> grid{b, a};
  const CvResult cv = cross_validate(oracle.space().vocab(), data, grid, CvProtocol{}, 3);
  CHECK(cv.best_index == 1);
  CHECK(cv.best == a);
  CHECK(cv.scores.size() == 2);

  const std::vector<GcnConfig> one{b};
  CHECK(cross_validate(oracle.space().vocab(), data, one, CvProtocol{}, 3).best == b);

  const GcnConfig base = GcnConfig::nasbench_regressor();
  const GcnConfig grown = grow_for_full_data(base, 5, 1.5);
  const auto p0 = gcn_parameter_count(base, 5), p1 = grown.node_dim > base.node_dim ? gcn_parameter_count(grown, 5) : 0;
  CHECK(p1 >= 1.5 * static_cast<double>(p0));
  GcnConfig smaller = grown;
  smaller.node_dim -= 1;
  CHECK(static_cast<double>(gcn_parameter_count(smaller, 5)) < 1.5 * static_cast<double>(p0));
  CHECK(gcn_parameter_count(base, 5) == GcnModel::initialize(base, OpVocabulary::cell(), 0).parameter_count());
}

TEST_CASE("checkpoint round trip keeps predictions") {
  const auto vocab = OpVocabulary::cell();
  const GcnModel m = GcnModel::initialize(small_config(), vocab, 11);
  std::stringstream ss;
  write_checkpoint(ss, m.to_checkpoint());
  const GcnModel r = GcnModel::from_checkpoint(read_checkpoint(ss));
  CHECK(r.config() == m.config());
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const ArchGraph g = SearchSpace::cell().sample(rng);
    CHECK(r.predict_accuracy(g) == m.predict_accuracy(g));
  }
  Checkpoint broken = m.to_checkpoint();
  broken.tensors.pop_back();
  CHECK_THROWS(GcnModel::from_checkpoint(broken));
}

TEST_CASE("gcn ranks held-out cells better than the mlp baseline") {
  SyntheticSpec spec;
  spec.space = SpaceKind::kCell;
  const SyntheticOracle oracle(spec);
  GcnConfig gcfg = parse_gcn_config("layers=3 node_dim=32 fc=32 epochs=50 lr=1e-3");
  MlpConfig mcfg;
  mcfg.hidden_dims = {64, 64};
  mcfg.train = gcfg.train;
  int gcn_wins = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(42, trial));
    std::vector<LabeledSample> train;
    for (int i = 0; i < 80; ++i) {
      const ArchGraph a = oracle.sample(rng);
      train.push_back({a, oracle.base_accuracy(a)});
    }
    const auto gcn = train_gcn(gcfg, oracle.space().vocab(), train, trial).model;
    const auto mlp = train_mlp(mcfg, oracle.space().vocab(), train, trial).model;
    std::vector<double> truth, pg, pm;
    for (int i = 0; i < 200; ++i) {
      const ArchGraph a = oracle.sample(rng);
      truth.push_back(oracle.base_accuracy(a));
      pg.push_back(gcn.predict_accuracy(a));
      pm.push_back(mlp.predict_accuracy(a));
    }
    gcn_wins += kendall_tau(pm, truth) <= kendall_tau(pg, truth);
  }
  CHECK(gcn_wins >= 14);
}
