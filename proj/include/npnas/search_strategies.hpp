// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "npnas/benchmark_oracle.hpp"
#include "npnas/gcn_predictor.hpp"
#include "npnas/pareto.hpp"
#include "npnas/trajectory.hpp"

namespace npnas {

/// Exactly one of max_models / max_seconds is set.
struct Budget {
  std::optional<int> max_models;
  std::optional<double> max_seconds;

  static Budget models(int n) { return Budget{n, std::nullopt}; }
  static Budget seconds(double s) { return Budget{std::nullopt, s}; }
  void validate() const;
};

class BudgetExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The only channel through which a strategy observes accuracies. train()
/// returns the replica's fixed validation run and charges its cost; test
/// accuracies are looked up by finish() once the selection is final.
class SearchSession {
 public:
  SearchSession(const BenchmarkOracle& oracle, Budget budget, std::uint64_t replica_seed,
                bool allow_repeats = false);

  const BenchmarkOracle& oracle() const noexcept { return replica_.oracle(); }
  const SearchSpace& space() const { return oracle().space(); }

  /// False once the model budget is used up or the simulated clock has
  /// reached max_seconds (the last model may overrun it).
  bool can_train() const;
  /// Throws BudgetExhaustedError when !can_train(), and std::logic_error
  /// for a repeat when repeats are not allowed.
  double train(const ArchGraph& arch);
  bool trained(const ArchGraph& arch) const { return seen_.contains(canonical_hash(arch)); }
  const std::unordered_set<ArchKey, ArchKeyHash>& trained_keys() const noexcept { return seen_; }
  std::size_t num_trained() const noexcept { return events_.size(); }
  double elapsed_seconds() const noexcept { return seconds_; }

  /// Selects argmax val (ties to the smaller key), queries its final report
  /// and annotates every event with the selection of its prefix.
  Trajectory finish(std::string strategy, bool exhausted = false) const;

 private:
  ReplicaOracle replica_;
  Budget budget_;
  bool allow_repeats_;
  std::vector<TrajectoryEvent> events_;
  std::vector<ArchGraph> archs_;
  std::unordered_set<ArchKey, ArchKeyHash> seen_;
  double seconds_ = 0.0;
};

/// Up to `count` distinct architectures not in `exclude` that satisfy
/// `accept`. Draws uniformly from the oracle's domain when it is finite,
/// otherwise by rejection. Sets *exhausted when fewer were found.
std::vector<ArchGraph> sample_distinct(const BenchmarkOracle& oracle, Rng& rng, std::size_t count,
                                       const std::unordered_set<ArchKey, ArchKeyHash>& exclude = {},
                                       const std::function<bool(const ArchGraph&)>& accept = {},
                                       bool* exhausted = nullptr);

Trajectory random_search(const BenchmarkOracle& oracle, Budget budget, std::uint64_t seed);

/// Trains every architecture of a finite domain. Throws std::invalid_argument
/// otherwise.
Trajectory oracle_search(const BenchmarkOracle& oracle, std::uint64_t seed);

struct EvolutionConfig {
  int population_size = 100;
  int sample_size = 10;
  double p_edge = 1.0 / 14.0;
  double p_node = 1.0 / 10.0;

  void validate() const;
};

/// Bernoulli trial counts over every mutation attempt, including rejected ones.
struct MutationStats {
  std::int64_t edge_trials = 0;
  std::int64_t edge_flips = 0;
  std::int64_t node_trials = 0;
  std::int64_t node_changes = 0;
  std::int64_t attempts = 0;
  std::int64_t children = 0;
};

struct EvolutionTrace {
  /// Population size after each evolution step.
  std::vector<std::size_t> population_size;
  /// Birth index of the removed member and of the oldest member before removal.
  std::vector<int> removed_birth;
  std::vector<int> oldest_birth;
  MutationStats mutation;
};

/// Flips each potential edge with p_edge (cell space only) and moves each
/// mutable node to a different allowed op with p_node. Repeats until the
/// child is valid and differs from the parent.
ArchGraph mutate(const ArchGraph& parent, const SearchSpace& space, const EvolutionConfig& cfg, Rng& rng,
                 MutationStats* stats = nullptr);

/// Aging evolution: tournament of sample_size members drawn without
/// replacement, mutate the best, append the child, drop the oldest.
Trajectory regularized_evolution(const BenchmarkOracle& oracle, Budget budget, const EvolutionConfig& cfg,
                                 std::uint64_t seed, EvolutionTrace* trace = nullptr);

struct PredictorSearchConfig {
  int n_train = 172;
  int k_validate = 100;
  int pool_size = 10000;
  bool two_stage = false;
  /// Regressor candidates; cross-validated when there is more than one.
  std::vector<GcnConfig> grid{GcnConfig::nasbench_regressor()};
  GcnConfig classifier = GcnConfig::nasbench_classifier();
  double threshold = 91.0;
  CvProtocol cv;
  /// Parameter growth applied to the selected config before the final fit.
  double growth = 1.0;

  void validate() const;
};

/// Trains on N random models, ranks a pool of M unseen models and trains
/// the top K. The budget is N + K models.
Trajectory neural_predictor_search(const BenchmarkOracle& oracle, const PredictorSearchConfig& cfg,
                                   std::uint64_t seed);

struct LatencySearchConfig {
  double lo_ms = 75.0;
  double hi_ms = 85.0;
  int n_train = 119;
  int pool_size = 10000;
  int j = 6;
  SoftParetoWindow window = SoftParetoWindow::kPreviousKept;
  GcnConfig predictor = GcnConfig::proxyless_regressor();

  void validate() const;
};

struct LatencySearchResult {
  Trajectory trajectory;
  /// Predicted accuracy of every pool member.
  std::vector<ParetoPoint> candidates;
  /// Pool members that passed the soft-Pareto filter (predicted accuracy).
  std::vector<ParetoPoint> finalists;
  /// Hard frontier of the finalists' final-report accuracy.
  std::vector<ParetoPoint> frontier;
};

LatencySearchResult latency_constrained_search(const BenchmarkOracle& oracle, const LatencySearchConfig& cfg,
                                               std::uint64_t seed);

}  // namespace npnas
