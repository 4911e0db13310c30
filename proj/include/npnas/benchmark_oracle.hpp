// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "npnas/arch_graph.hpp"
#include "npnas/rng.hpp"

namespace npnas {

inline constexpr int kRunsPerArch = 3;

class MissingArchError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class LatencyUnavailableError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Everything a benchmark knows about one architecture.
struct ArchRecord {
  ArchKey key;
  ArchGraph arch;
  double train_seconds = 0.0;
  std::array<double, kRunsPerArch> val{};
  std::array<double, kRunsPerArch> test{};
  std::optional<double> latency_ms;

  double mean_test() const { return (test[0] + test[1] + test[2]) / 3.0; }
};

/// Read-only ground truth shared by every search replica.
class BenchmarkOracle {
 public:
  virtual ~BenchmarkOracle() = default;

  virtual const SearchSpace& space() const = 0;
  virtual bool contains(const ArchGraph& arch) const = 0;
  /// Throws MissingArchError for unknown architectures.
  virtual ArchRecord record(const ArchGraph& arch) const = 0;
  virtual bool has_latency() const = 0;

  /// Every architecture the oracle can answer for, when that set is finite
  /// and small enough to list. nullopt otherwise.
  virtual std::optional<std::vector<ArchGraph>> domain() const = 0;
  /// Uniform draw from the domain, or from the space when unbounded.
  virtual ArchGraph sample(Rng& rng) const = 0;

  /// Mean of the test runs.
  double final_report(const ArchGraph& arch) const { return record(arch).mean_test(); }
  /// Throws LatencyUnavailableError when no latency model is configured.
  double latency(const ArchGraph& arch) const;
};

/// Tabular benchmark loaded from the tab-separated record format:
///
///   #R=3<TAB>fields=hash,ops,adj,train_s,v1,t1,v2,t2,v3,t3[,latency_ms]
///   <hex key><TAB><op indices, comma separated><TAB><adjacency bits>...
class TabularOracle final : public BenchmarkOracle {
 public:
  TabularOracle(SearchSpace space, std::vector<ArchRecord> records);

  /// Throws ParseError naming the line for malformed input and for
  /// duplicate keys; accuracies must lie in (0, 100] and train_s be > 0.
  static TabularOracle load(std::istream& in, SearchSpace space);
  static TabularOracle load_file(const std::string& path, SearchSpace space);

  void dump(std::ostream& out) const;

  const SearchSpace& space() const override { return space_; }
  bool contains(const ArchGraph& arch) const override;
  ArchRecord record(const ArchGraph& arch) const override;
  bool has_latency() const override { return has_latency_; }
  std::optional<std::vector<ArchGraph>> domain() const override;
  ArchGraph sample(Rng& rng) const override;

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<ArchRecord>& records() const noexcept { return records_; }

 private:
  SearchSpace space_;
  std::vector<ArchRecord> records_;
  std::unordered_map<ArchKey, std::size_t, ArchKeyHash> index_;
  bool has_latency_ = false;
};

struct SyntheticSpec {
  SpaceKind space = SpaceKind::kSynthetic;
  /// Standard deviation of per-run accuracy noise, in percent.
  double noise_sd = 0.3;
  std::uint64_t seed = 1;
  /// Fraction of architectures forced into the unstable [10, 20] band.
  double bad_fraction = 0.1;
  bool latency = true;
  /// Base accuracy is 10 + 86 * sigmoid(sharpness * z + offset).
  double sharpness = 1.0;
  double offset = 1.3;
};

/// Deterministic synthetic benchmark.
///
/// Base accuracy is 10 + 86 * sigmoid(sharpness * z + offset) where z is the
/// standardised sum of position-weighted op qualities, seeded pairwise edge
/// terms and a depth bonus. Architectures whose instability score (mostly
/// pooling and skip content) lies above the (1 - bad_fraction) quantile are
/// mapped into [10, 20]. Run r of an architecture adds N(0, noise_sd^2)
/// drawn from (seed, key, r) to both its val and test accuracy.
class SyntheticOracle final : public BenchmarkOracle {
 public:
  explicit SyntheticOracle(const SyntheticSpec& spec);

  const SyntheticSpec& spec() const noexcept { return spec_; }
  const SearchSpace& space() const override { return space_; }
  bool contains(const ArchGraph& arch) const override { return space_.is_valid(arch); }
  ArchRecord record(const ArchGraph& arch) const override;
  bool has_latency() const override { return spec_.latency; }
  std::optional<std::vector<ArchGraph>> domain() const override;
  ArchGraph sample(Rng& rng) const override { return space_.sample(rng); }

  /// Noise-free accuracy f(arch).
  double base_accuracy(const ArchGraph& arch) const;
  bool is_bad(const ArchGraph& arch) const;
  /// Quantile of f over the calibration set (the whole space when enumerable).
  double accuracy_quantile(double q) const;
  /// Writes the whole domain (or `count` samples when unbounded) as a table.
  void dump_table(std::ostream& out, std::size_t count = 0) const;

 private:
  double raw_score(const ArchGraph& arch) const;
  double instability(const ArchGraph& arch) const;
  double cost(const ArchGraph& arch) const;

  SyntheticSpec spec_;
  SearchSpace space_;
  std::vector<double> op_quality_;
  std::vector<double> op_instability_;
  std::vector<double> op_cost_;
  std::vector<double> pair_;  // vocab x vocab edge terms
  double score_mean_ = 0.0;
  double score_sd_ = 1.0;
  double bad_cut_ = 0.0;
  double latency_base_ = 0.0;
  double latency_scale_ = 0.0;
  std::vector<double> sorted_accuracy_;
};

/// Relative compute cost of one op, from its name: k*k*e for "ibKxK-E",
/// 9 for conv3x3, 1 for conv1x1, 0.5 for max-pool, 0 otherwise.
double op_cost(std::string_view name);

std::unique_ptr<BenchmarkOracle> make_synthetic_oracle(const SyntheticSpec& spec);

struct SignalReply {
  double val_acc = 0.0;
  double cost_seconds = 0.0;
  int run = 0;
};

/// Per-replica view of an oracle. The validation run served for an
/// architecture is drawn once per replica and then fixed.
class ReplicaOracle {
 public:
  ReplicaOracle(const BenchmarkOracle& oracle, std::uint64_t replica_seed)
      : oracle_(&oracle), seed_(replica_seed) {}

  const BenchmarkOracle& oracle() const noexcept { return *oracle_; }
  SignalReply search_signal(const ArchGraph& arch);
  int run_index(const ArchGraph& arch);

 private:
  const BenchmarkOracle* oracle_;
  std::uint64_t seed_;
  std::unordered_map<ArchKey, int, ArchKeyHash> runs_;
};

/// Rejection-samples an architecture whose latency lies in [lo_ms, hi_ms].
/// Throws std::runtime_error when the window looks empty.
ArchGraph sample_in_latency_window(const BenchmarkOracle& oracle, Rng& rng, double lo_ms, double hi_ms);

}  // namespace npnas
