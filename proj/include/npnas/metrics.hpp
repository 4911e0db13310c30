// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "npnas/trajectory.hpp"

namespace npnas {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mean squared error. Throws MetricError on empty or mismatched input.
double mse(std::span<const double> pred, std::span<const double> truth);

/// Kendall tau-b in O(n log n). Throws MetricError when either input is
/// constant or the lengths differ.
double kendall_tau(std::span<const double> a, std::span<const double> b);

/// 1 - SS_res / SS_tot. Throws MetricError when `truth` is constant.
double r2_score(std::span<const double> pred, std::span<const double> truth);

struct ConfusionRates {
  int tp = 0;
  int fn = 0;
  int fp = 0;
  int tn = 0;
  /// NaN when there are no positives (fnr) or no negatives (fpr).
  double fnr = 0.0;
  double fpr = 0.0;
};

ConfusionRates fnr_fpr(std::span<const bool> pred_labels, std::span<const bool> true_labels);

enum class BudgetAxis { kModels, kSeconds };

struct RunAggregate {
  BudgetAxis axis = BudgetAxis::kModels;
  std::vector<double> budget;
  std::vector<double> mean_test;
  std::vector<double> sd_test;
  std::vector<double> mean_val;
  std::vector<double> sd_val;
  std::size_t replicas = 0;
};

/// Value of replica r at budget b is the selection after the last model
/// trained within b. Budgets beyond a replica's end reuse its final
/// selection. Sample (n - 1) standard deviation. Needs at least two
/// trajectories and a non-empty grid; every grid point must cover at least
/// one model of every replica.
RunAggregate aggregate_runs(std::span<const Trajectory> runs, std::span<const double> grid,
                            BudgetAxis axis = BudgetAxis::kModels);

/// Budget at which `curve` first reaches `target`, linearly interpolated
/// between grid points. nullopt when never reached.
std::optional<double> budget_to_reach(std::span<const double> budget, std::span<const double> curve, double target);

/// budget_to_reach(b) / budget_to_reach(a) on the mean test curves.
/// nullopt when either curve never reaches the target.
std::optional<double> speedup_ratio(const RunAggregate& a, const RunAggregate& b, double target);

double mean_of(std::span<const double> xs);
/// Sample standard deviation; 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

}  // namespace npnas
