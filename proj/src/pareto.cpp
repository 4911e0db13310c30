// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/pareto.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace npnas {

namespace {

void sort_by_latency(std::vector<ParetoPoint>& pts) {
  std::sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
    return a.key < b.key;
  });
}

}  // namespace

std::vector<ParetoPoint> soft_pareto_filter(std::vector<ParetoPoint> candidates, int j, SoftParetoWindow window) {
  if (j < 1) throw std::invalid_argument("soft_pareto_filter: J must be >= 1");
  sort_by_latency(candidates);
  const auto jj = static_cast<std::size_t>(j);
  std::vector<ParetoPoint> kept;
  std::deque<double> recent;
  for (const auto& c : candidates) {
    const bool keep = recent.size() < jj || c.accuracy > *std::min_element(recent.begin(), recent.end());
    if (keep) kept.push_back(c);
    if (keep || window == SoftParetoWindow::kPreviousCandidates) {
      recent.push_back(c.accuracy);
      if (recent.size() > jj) recent.pop_front();
    }
  }
  return kept;
}

std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points) {
  sort_by_latency(points);
  std::vector<ParetoPoint> out;
  double best_faster = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < points.size()) {
    std::size_t end = i;
    double group_max = -std::numeric_limits<double>::infinity();
    while (end < points.size() && points[end].latency_ms == points[i].latency_ms) {
      group_max = std::max(group_max, points[end].accuracy);
      ++end;
    }
    for (std::size_t k = i; k < end; ++k)
      if (points[k].accuracy == group_max && group_max >= best_faster) out.push_back(points[k]);
    best_faster = std::max(best_faster, group_max);
    i = end;
  }
  return out;
}

}  // namespace npnas
