// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <vector>

#include "npnas/arch_graph.hpp"

namespace npnas {

struct ParetoPoint {
  double latency_ms = 0.0;
  double accuracy = 0.0;
  ArchKey key;

  bool operator==(const ParetoPoint&) const = default;
};

/// Which J models a candidate is compared against.
enum class SoftParetoWindow {
  kPreviousCandidates,  // the J candidates just before it in latency order
  kPreviousKept,        // the J most recently kept candidates
};

/// Sorts by (latency, key) and keeps candidate i when fewer than J models
/// precede it in the window or its accuracy beats the window minimum.
/// Output is in latency order. Throws std::invalid_argument when J < 1.
std::vector<ParetoPoint> soft_pareto_filter(std::vector<ParetoPoint> candidates, int j,
                                            SoftParetoWindow window = SoftParetoWindow::kPreviousCandidates);

/// Points for which no model at most as slow has strictly higher accuracy.
/// Output is in (latency, key) order.
std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points);

}  // namespace npnas
