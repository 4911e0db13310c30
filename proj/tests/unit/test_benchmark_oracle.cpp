// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include <algorithm>
#include <array>
#include <sstream>

#include "doctest.h"
#include "npnas/benchmark_oracle.hpp"
#include "npnas/search_strategies.hpp"

using namespace npnas;

namespace {

constexpr const char* kHeader = "#R=3\tfields=hash,ops,adj,train_s,v1,t1,v2,t2,v3,t3";

std::string record_line(const ArchGraph& a, const std::string& rest) {
  std::string ops;
  for (int i = 0; i < a.num_nodes(); ++i) ops += (i ? "," : "") + std::to_string(a.op(i));
  std::string adj;
  for (auto b : a.adjacency()) adj += b ? '1' : '0';
  return canonical_hash(a).hex() + "\t" + ops + "\t" + adj + "\t" + rest + "\n";
}

ArchGraph syn(std::vector<int> ops) {
  ArchGraph g = synthetic_template();
  for (int i = 0; i < kSyntheticNodes; ++i) g.set_op(i, ops[static_cast<std::size_t>(i)]);
  return g;
}

std::string three_records() {
  return std::string(kHeader) + "\n" + record_line(syn({0, 0, 0, 0, 0}), "1200.5\t94.1\t94\t94.3\t94.2\t93.9\t94.4") +
         record_line(syn({1, 2, 3, 0, 1}), "800\t90\t89.5\t90.25\t89.75\t90.5\t90") +
         record_line(syn({3, 3, 3, 3, 3}), "300\t11\t10.5\t12\t9.5\t10.25\t10.125");
}

}  // namespace

TEST_CASE("tabular oracle loading") {
  std::istringstream empty("");
  const TabularOracle none = TabularOracle::load(empty, SearchSpace::synthetic());
  CHECK(none.size() == 0);
  CHECK_THROWS_WITH_AS(none.record(syn({0, 0, 0, 0, 0})), doctest::Contains("MISSING_ARCH"), MissingArchError);
  Rng rng(0);
  CHECK_THROWS_AS(none.sample(rng), MissingArchError);

  std::istringstream in(three_records());
  const TabularOracle t = TabularOracle::load(in, SearchSpace::synthetic());
  CHECK(t.size() == 3);
  std::ostringstream out;
  t.dump(out);
  CHECK(out.str() == three_records());

  CHECK(t.final_report(syn({0, 0, 0, 0, 0})) == doctest::Approx(94.2));
  const ArchRecord r = t.record(syn({1, 2, 3, 0, 1}));
  CHECK(r.val == std::array<double, 3>{90, 90.25, 90.5});
  CHECK(r.train_seconds == 800);
  CHECK_FALSE(t.has_latency());
  CHECK_THROWS_AS(t.latency(r.arch), LatencyUnavailableError);
}

TEST_CASE("tabular oracle rejects bad records") {
  const std::string head = std::string(kHeader) + "\n";
  const ArchGraph a = syn({0, 1, 2, 3, 0});
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return TabularOracle::load(in, SearchSpace::synthetic());
  };
  CHECK_THROWS_WITH_AS(load(head + record_line(a, "100\t0\t90\t90\t90\t90\t90")), doctest::Contains("line 2"),
                       ParseError);
  CHECK_THROWS_AS(load(head + record_line(a, "100\t90\t100.5\t90\t90\t90\t90")), ParseError);
  CHECK_THROWS_AS(load(head + record_line(a, "0\t90\t90\t90\t90\t90\t90")), ParseError);
  CHECK_THROWS_AS(load(head + record_line(a, "100\t90\t90\t90\t90\t90")), ParseError);
  const std::string dup = record_line(a, "100\t90\t90\t90\t90\t90\t90");
  CHECK_THROWS_WITH_AS(load(head + dup + dup), doctest::Contains("line 3"), ParseError);
  std::string wrong_hash = dup;
  wrong_hash[0] = wrong_hash[0] == '0' ? '1' : '0';
  CHECK_THROWS_AS(load(head + wrong_hash), ParseError);
  CHECK_THROWS_AS(load("no header\n"), ParseError);

  const std::string lat_head = head.substr(0, head.size() - 1) + ",latency_ms\n";
  const TabularOracle lt = load(lat_head + record_line(a, "100\t90\t90\t90\t90\t90\t90\t81.5"));
  CHECK(lt.has_latency());
  CHECK(lt.latency(a) == 81.5);
}

TEST_CASE("synthetic oracle noise") {
  SyntheticSpec quiet;
  quiet.noise_sd = 0.0;
  const SyntheticOracle q(quiet);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const ArchGraph a = q.sample(rng);
    const ArchRecord r = q.record(a);
    for (int k = 0; k < kRunsPerArch; ++k) {
      CHECK(r.val[k] == q.base_accuracy(a));
      CHECK(r.test[k] == q.base_accuracy(a));
    }
    ReplicaOracle rep(q, 5);
    CHECK(rep.search_signal(a).val_acc == q.base_accuracy(a));
    CHECK(q.final_report(a) == doctest::Approx(q.base_accuracy(a)).epsilon(1e-14));
  }

  const SyntheticOracle noisy(SyntheticSpec{});
  const SyntheticOracle again(SyntheticSpec{});
  const auto all = *noisy.domain();
  CHECK(all.size() == 1024);
  double within = 0;
  for (const auto& a : all) {
    const ArchRecord r1 = noisy.record(a), r2 = again.record(a);
    CHECK(r1.val == r2.val);
    CHECK(r1.test == r2.test);
    CHECK(r1.train_seconds > 0);
    for (int k = 0; k < kRunsPerArch; ++k) within += std::abs(r1.val[k] - noisy.base_accuracy(a)) < 1.2;
  }
  CHECK(within / (3.0 * 1024) > 0.99);
}

TEST_CASE("synthetic landscape") {
  SyntheticSpec spec;
  spec.bad_fraction = 0.2;
  const SyntheticOracle o(spec);
  const auto all = *o.domain();
  int bad = 0;
  for (const auto& a : all) {
    const double f = o.base_accuracy(a);
    CHECK(f > 10.0);
    CHECK(f < 96.0);
    if (o.is_bad(a)) {
      ++bad;
      CHECK(f <= 50.0);
    }
  }
  CHECK(std::abs(bad / 1024.0 - 0.2) < 0.05);
  std::vector<double> fs;
  for (const auto& a : all) fs.push_back(o.base_accuracy(a));
  std::sort(fs.begin(), fs.end());
  CHECK(o.accuracy_quantile(0.0) == fs.front());
  CHECK(o.accuracy_quantile(1.0) == fs.back());

  const SyntheticOracle other([] {
    SyntheticSpec s;
    s.seed = 2;
    return s;
  }());
  CHECK(other.base_accuracy(all[100]) != o.base_accuracy(all[100]));
}

TEST_CASE("oracle search finds the enumerated optimum") {
  SyntheticSpec quiet;
  quiet.noise_sd = 0.0;
  const SyntheticOracle o(quiet);
  const auto all = *o.domain();
  ArchGraph best = all.front();
  for (const auto& a : all)
    if (o.base_accuracy(a) > o.base_accuracy(best) ||
        (o.base_accuracy(a) == o.base_accuracy(best) && canonical_hash(a) < canonical_hash(best)))
      best = a;
  const Trajectory t = oracle_search(o, 3);
  CHECK(t.final.arch == best);
  CHECK(t.events.size() == 1024);
}

TEST_CASE("run selection is uniform and fixed per replica") {
  const SyntheticOracle o(SyntheticSpec{});
  const ArchGraph a = synthetic_template();
  std::array<int, 3> counts{};
  for (std::uint64_t s = 0; s < 10000; ++s) {
    ReplicaOracle rep(o, derive_seed(77, s));
    const SignalReply first = rep.search_signal(a);
    ++counts[static_cast<std::size_t>(first.run)];
    const SignalReply second = rep.search_signal(a);
    CHECK(second.val_acc == first.val_acc);
    CHECK(second.run == first.run);
    CHECK(first.val_acc == o.record(a).val[static_cast<std::size_t>(first.run)]);
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 10000 / 3.0) * (c - 10000 / 3.0) / (10000 / 3.0);
  CHECK(chi2 < 9.21);  // df = 2, alpha = 0.01
}

TEST_CASE("synthetic latency") {
  const SyntheticOracle o(SyntheticSpec{});
  const ArchGraph light = syn({3, 3, 3, 3, 3});
  const ArchGraph heavy = syn({0, 0, 0, 0, 0});
  CHECK(o.latency(light) < o.latency(heavy));
  CHECK(o.latency(heavy) == o.latency(syn({0, 0, 0, 0, 0})));
  CHECK(op_cost("ib5x5-6") == 150.0);
  CHECK(op_cost("zero") == 0.0);

  SyntheticSpec lin;
  lin.space = SpaceKind::kLinear;
  const SyntheticOracle lo(lin);
  Rng rng(12);
  int inside = 0;
  for (int i = 0; i < 2000; ++i) {
    const double ms = lo.latency(lo.sample(rng));
    inside += ms >= 75.0 && ms <= 85.0;
  }
  CHECK(inside >= 400);
  for (int i = 0; i < 1000; ++i) {
    const double ms = lo.latency(sample_in_latency_window(lo, rng, 75.0, 85.0));
    CHECK(ms >= 75.0);
    CHECK(ms <= 85.0);
  }
  CHECK_THROWS(sample_in_latency_window(lo, rng, 1000.0, 1001.0));

  SyntheticSpec none;
  none.latency = false;
  CHECK_THROWS_AS(SyntheticOracle(none).latency(light), LatencyUnavailableError);
}

TEST_CASE("synthetic table dump loads back") {
  const SyntheticOracle o(SyntheticSpec{});
  std::stringstream ss;
  o.dump_table(ss);
  const TabularOracle t = TabularOracle::load(ss, SearchSpace::synthetic());
  CHECK(t.size() == 1024);
  CHECK(t.has_latency());
  for (const auto& r : t.records()) {
    const ArchRecord s = o.record(r.arch);
    CHECK(r.val == s.val);
    CHECK(r.test == s.test);
    CHECK(*r.latency_ms == *s.latency_ms);
  }
}
