// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace npnas {

namespace {

void require_same_length(std::size_t a, std::size_t b, std::size_t min_len, const char* what) {
  if (a != b) throw MetricError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  if (a < min_len) throw MetricError(std::string(what) + ": need at least " + std::to_string(min_len) + " values");
}

// Number of tied pairs in a sorted sequence.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    It run = first;
    std::int64_t t = 0;
    while (run != last && eq(*run, *first)) ++run, ++t;
    total += t * (t - 1) / 2;
    first = run;
  }
  return total;
}

// Stable merge sort on .second, returning the number of inversions.
std::int64_t sort_count_swaps(std::vector<std::pair<double, double>>& v) {
  std::vector<std::pair<double, double>> buf(v.size());
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j].second < v[i].second) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred.size(), truth.size(), 1, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), 2, "kendall_tau");
  const std::size_t n = a.size();
  std::vector<std::pair<double, double>> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = {a[i], b[i]};
  std::sort(v.begin(), v.end());

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first == y.first; });
  const std::int64_t n3 = tied_pairs(v.begin(), v.end(), [](const auto& x, const auto& y) { return x == y; });
  const std::int64_t swaps = sort_count_swaps(v);
  const std::int64_t n2 = tied_pairs(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.second == y.second; });

  if (n1 == n0 || n2 == n0) throw MetricError("kendall_tau: undefined for constant input");
  const double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(num / den, -1.0, 1.0);
}

double r2_score(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred.size(), truth.size(), 2, "r2_score");
  const double m = mean_of(truth);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - m) * (truth[i] - m);
  }
  if (ss_tot == 0.0) throw MetricError("r2_score: true values are constant");
  return 1.0 - ss_res / ss_tot;
}

ConfusionRates fnr_fpr(std::span<const bool> pred_labels, std::span<const bool> true_labels) {
  require_same_length(pred_labels.size(), true_labels.size(), 1, "fnr_fpr");
  ConfusionRates c;
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    if (true_labels[i]) {
      pred_labels[i] ? ++c.tp : ++c.fn;
    } else {
      pred_labels[i] ? ++c.fp : ++c.tn;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  c.fnr = c.tp + c.fn > 0 ? static_cast<double>(c.fn) / (c.fn + c.tp) : nan;
  c.fpr = c.fp + c.tn > 0 ? static_cast<double>(c.fp) / (c.fp + c.tn) : nan;
  return c;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

RunAggregate aggregate_runs(std::span<const Trajectory> runs, std::span<const double> grid, BudgetAxis axis) {
  if (runs.size() < 2) throw MetricError("aggregate_runs: need at least two trajectories");
  if (grid.empty()) throw MetricError("aggregate_runs: empty budget grid");
  RunAggregate agg;
  agg.axis = axis;
  agg.replicas = runs.size();
  std::vector<double> tests(runs.size()), vals(runs.size());
  for (double b : grid) {
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& ev = runs[r].events;
      auto within = [&](const TrajectoryEvent& e) {
        return axis == BudgetAxis::kModels ? static_cast<double>(e.model_index + 1) <= b : e.cumulative_seconds <= b;
      };
      const auto it = std::partition_point(ev.begin(), ev.end(), within);
      if (it == ev.begin()) {
        throw MetricError("aggregate_runs: budget " + std::to_string(b) + " precedes the first model of a replica");
      }
      tests[r] = std::prev(it)->selected_test;
      vals[r] = std::prev(it)->selected_val;
    }
    agg.budget.push_back(b);
    agg.mean_test.push_back(mean_of(tests));
    agg.sd_test.push_back(sample_sd(tests));
    agg.mean_val.push_back(mean_of(vals));
    agg.sd_val.push_back(sample_sd(vals));
  }
  return agg;
}

std::optional<double> budget_to_reach(std::span<const double> budget, std::span<const double> curve, double target) {
  require_same_length(budget.size(), curve.size(), 1, "budget_to_reach");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] < target) continue;
    if (i == 0) return budget[0];
    const double c0 = curve[i - 1], c1 = curve[i];
    const double t = (target - c0) / (c1 - c0);
    return budget[i - 1] + t * (budget[i] - budget[i - 1]);
  }
  return std::nullopt;
}

std::optional<double> speedup_ratio(const RunAggregate& a, const RunAggregate& b, double target) {
  const auto ta = budget_to_reach(a.budget, a.mean_test, target);
  const auto tb = budget_to_reach(b.budget, b.mean_test, target);
  if (!ta || !tb || *ta <= 0.0) return std::nullopt;
  return *tb / *ta;
}

}  // namespace npnas
