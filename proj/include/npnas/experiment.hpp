// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "npnas/benchmark_oracle.hpp"
#include "npnas/metrics.hpp"
#include "npnas/search_strategies.hpp"

namespace npnas {

/// Validation failure. `field` names the offending key ("" when global).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::invalid_argument(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Strategy { kRandom, kEvolution, kPredictor, kOracle };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct ExperimentConfig {
  Strategy strategy = Strategy::kRandom;
  SpaceKind space = SpaceKind::kSynthetic;

  /// Tabular source; empty means the synthetic benchmark.
  std::string oracle_file;
  SyntheticSpec synthetic;

  Budget budget = Budget::models(1);
  int replicas = 1;
  std::uint64_t seed = 0;
  int threads = 1;

  EvolutionConfig evolution;
  PredictorSearchConfig predictor;
  /// False leaves the synthetic benchmark free to pick its own 10th percentile.
  bool threshold_set = false;

  std::string out_dir = "results";
  std::string name;  // file prefix; defaults to the strategy name
  /// Explicit JSON-lines path; overrides out_dir/name.jsonl.
  std::string jsonl_path;

  std::uint64_t replica_seed(int replica) const { return derive_seed(seed, static_cast<std::uint64_t>(replica)); }
  std::string output_stem() const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys and
/// missing required fields (strategy, space, budget or budget_seconds, and
/// one of oracle_file / synthetic) raise ConfigError.
ExperimentConfig parse_experiment_config(std::string_view text);
/// The `key = value` lines of a config text, comments stripped, in order.
std::vector<std::pair<std::string, std::string>> parse_config_entries(std::string_view text);
ExperimentConfig parse_experiment_config(const std::vector<std::pair<std::string, std::string>>& entries);

/// Every accepted key with its default, one per line, for --help output.
std::string experiment_config_reference();

/// NPNAS_OUT_DIR replaces out_dir, NPNAS_THREADS replaces threads.
void apply_environment(ExperimentConfig& cfg);

std::unique_ptr<BenchmarkOracle> make_oracle(const ExperimentConfig& cfg);

Trajectory run_replica(const ExperimentConfig& cfg, const BenchmarkOracle& oracle, int replica);

struct ExperimentResult {
  std::vector<Trajectory> runs;  // in replica order
  bool interrupted = false;
  double wall_seconds = 0.0;
  std::string jsonl_path;
  std::string csv_path;
  std::string summary_path;
};

/// Runs every replica on `threads` workers and writes, in replica order,
/// the JSON-lines trajectories, the aggregate CSV and a summary JSON. When
/// `stop` becomes true no new replicas start and completed ones are flushed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::atomic<bool>* stop = nullptr);

/// Writes the event lines and the final line of one replica.
void write_trajectory_jsonl(std::ostream& out, const Trajectory& t, int replica);
/// Reads trajectories written by write_trajectory_jsonl, in replica order.
std::vector<Trajectory> read_trajectories_jsonl(std::istream& in);

/// Budget grid 1..shortest trajectory length (model axis), or `points`
/// evenly spaced simulated-time budgets covering every replica.
std::vector<double> default_budget_grid(std::span<const Trajectory> runs, BudgetAxis axis, int points = 50);
/// aggregate_runs that also accepts a single trajectory (sd = 0).
RunAggregate aggregate_any(std::span<const Trajectory> runs, std::span<const double> grid, BudgetAxis axis);
void write_aggregate_csv(std::ostream& out, const RunAggregate& agg);

}  // namespace npnas
