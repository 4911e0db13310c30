// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <string>
#include <vector>

#include "npnas/arch_graph.hpp"

namespace npnas {

/// One trained model. selected_* describe the best-by-val model among the
/// first model_index + 1 trained models and are filled in after the search.
struct TrajectoryEvent {
  int model_index = 0;
  double cumulative_seconds = 0.0;
  ArchKey key;
  double val_acc = 0.0;
  double selected_val = 0.0;
  double selected_test = 0.0;
};

struct FinalSelection {
  ArchGraph arch;
  ArchKey key;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct Trajectory {
  std::string strategy;
  std::vector<TrajectoryEvent> events;
  FinalSelection final;
  double total_seconds = 0.0;
  /// Set when the space ran out of unseen architectures before the budget.
  bool exhausted = false;
};

}  // namespace npnas
