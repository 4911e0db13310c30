// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include <algorithm>

#include "doctest.h"
#include "npnas/pareto.hpp"

using namespace npnas;

namespace {

std::vector<ParetoPoint> points(std::initializer_list<std::pair<double, double>> xs) {
  std::vector<ParetoPoint> out;
  std::uint64_t k = 1;
  for (auto [lat, acc] : xs) out.push_back({lat, acc, ArchKey{k++}});
  return out;
}

std::vector<ParetoPoint> random_points(Rng& rng, std::size_t n) {
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({std::floor(rng.uniform(70, 90) * 2) / 2, std::floor(rng.uniform(70, 76) * 4) / 4, ArchKey{rng.next()}});
  return out;
}

bool latency_order(const ParetoPoint& a, const ParetoPoint& b) {
  return a.latency_ms != b.latency_ms ? a.latency_ms < b.latency_ms : a.key < b.key;
}

std::vector<ParetoPoint> brute_frontier(std::vector<ParetoPoint> pts) {
  std::vector<ParetoPoint> out;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : pts) dominated |= q.latency_ms <= p.latency_ms && q.accuracy > p.accuracy;
    if (!dominated) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), latency_order);
  return out;
}

std::vector<ParetoPoint> brute_soft(std::vector<ParetoPoint> pts, int j, SoftParetoWindow window) {
  std::sort(pts.begin(), pts.end(), latency_order);
  std::vector<ParetoPoint> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> prev;
    if (window == SoftParetoWindow::kPreviousCandidates) {
      for (std::size_t k = i >= static_cast<std::size_t>(j) ? i - j : 0; k < i; ++k) prev.push_back(pts[k].accuracy);
    } else {
      for (std::size_t k = kept.size() >= static_cast<std::size_t>(j) ? kept.size() - j : 0; k < kept.size(); ++k)
        prev.push_back(kept[k].accuracy);
    }
    if (prev.size() < static_cast<std::size_t>(j) || pts[i].accuracy > *std::min_element(prev.begin(), prev.end()))
      kept.push_back(pts[i]);
  }
  return kept;
}

}  // namespace

TEST_CASE("soft pareto filter") {
  const auto inc = points({{70, 70}, {71, 71}, {72, 72}, {73, 73}, {74, 74}, {75, 75}, {76, 76}, {77, 77}});
  CHECK(soft_pareto_filter(inc, 6).size() == inc.size());

  const auto dec = points({{70, 80}, {71, 79}, {72, 78}, {73, 77}, {74, 76}, {75, 75}, {76, 74}, {77, 73}, {78, 72}});
  for (auto w : {SoftParetoWindow::kPreviousCandidates, SoftParetoWindow::kPreviousKept}) {
    const auto kept = soft_pareto_filter(dec, 6, w);
    REQUIRE(kept.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(kept[i] == dec[i]);
  }

  const auto zig = points({{1, 5}, {2, 4}, {3, 6}, {4, 6}, {5, 7}});
  const auto j1 = soft_pareto_filter(zig, 1);
  CHECK(j1.size() == 3);
  CHECK(j1[1].latency_ms == 3);
  CHECK(j1[2].latency_ms == 5);

  CHECK_THROWS(soft_pareto_filter(zig, 0));
}

TEST_CASE("pareto frontier") {
  CHECK(pareto_frontier(points({{80, 70}})).size() == 1);
  const auto f = pareto_frontier(points({{75, 74.0}, {80, 73.0}, {85, 74.5}}));
  REQUIRE(f.size() == 2);
  CHECK(f[0].latency_ms == 75);
  CHECK(f[1].latency_ms == 85);
  const auto tie = pareto_frontier(points({{75, 74.0}, {75, 74.0}, {80, 74.0}}));
  CHECK(tie.size() == 3);
}

TEST_CASE("frontier and filter match brute force") {
  Rng rng(21);
  for (int t = 0; t < 300; ++t) {
    const auto pts = random_points(rng, 1 + rng.below(60));
    const auto f = pareto_frontier(pts);
    CHECK(f == brute_frontier(pts));
    CHECK(pareto_frontier(f) == f);
    const int j = 1 + rng.below(8);
    CHECK(soft_pareto_filter(pts, j) == brute_soft(pts, j, SoftParetoWindow::kPreviousCandidates));
    CHECK(soft_pareto_filter(pts, j, SoftParetoWindow::kPreviousKept) ==
          brute_soft(pts, j, SoftParetoWindow::kPreviousKept));
  }
}
