// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "npnas/rng.hpp"
#include "npnas/tensor.hpp"

namespace npnas {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered list of operation labels; an op index is a position in this list.
class OpVocabulary {
 public:
  explicit OpVocabulary(std::vector<std::string> names);

  /// input, conv1x1, conv3x3, max-pool, output
  static OpVocabulary cell();
  /// Six inverted-bottleneck variants followed by "zero".
  static OpVocabulary linear();
  static OpVocabulary synthetic();

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  /// -1 when absent.
  int index_of(std::string_view name) const;

  bool operator==(const OpVocabulary&) const = default;

 private:
  std::vector<std::string> names_;
};

/// A candidate architecture: node operations plus a directed adjacency
/// matrix, entry (i, j) set meaning an edge i -> j. Self-loops are never
/// stored; acyclicity is checked by the owning search space.
class ArchGraph {
 public:
  ArchGraph() = default;
  ArchGraph(std::vector<int> ops, std::vector<std::uint8_t> adjacency);

  /// Linear graph 0 -> 1 -> ... -> n-1.
  static ArchGraph chain(std::vector<int> ops);

  int num_nodes() const noexcept { return static_cast<int>(ops_.size()); }
  const std::vector<int>& ops() const noexcept { return ops_; }
  int op(int node) const { return ops_.at(static_cast<std::size_t>(node)); }
  void set_op(int node, int op) { ops_.at(static_cast<std::size_t>(node)) = op; }

  bool edge(int from, int to) const {
    return adjacency_[static_cast<std::size_t>(from * num_nodes() + to)] != 0;
  }
  void set_edge(int from, int to, bool present);
  int num_edges() const;
  const std::vector<std::uint8_t>& adjacency() const noexcept { return adjacency_; }

  /// Kahn order, or nullopt when the graph has a cycle.
  std::optional<std::vector<int>> topological_order() const;
  bool is_acyclic() const { return topological_order().has_value(); }

  /// Relabels node i as perm[i], carrying ops and edges along.
  ArchGraph permuted(std::span<const int> perm) const;

  bool operator==(const ArchGraph&) const = default;

 private:
  std::vector<int> ops_;
  std::vector<std::uint8_t> adjacency_;
};

/// Stable 64-bit digest of (ops, adjacency).
struct ArchKey {
  std::uint64_t value = 0;
  std::string hex() const;
  static ArchKey from_hex(std::string_view text);
  auto operator<=>(const ArchKey&) const = default;
};

ArchKey canonical_hash(const ArchGraph& arch);

struct ArchKeyHash {
  std::size_t operator()(ArchKey k) const noexcept { return static_cast<std::size_t>(k.value); }
};

enum class AdjacencyNorm {
  kRowMean,    // D^-1 (A + I)
  kSymmetric,  // D^-1/2 (A + I) D^-1/2
};

struct EncodedGraph {
  Tensor2 features;  // I x D0 one-hot rows
  Tensor2 fwd_adj;   // row i aggregates over in-neighbours of i, plus itself
  Tensor2 bwd_adj;   // row i aggregates over out-neighbours of i, plus itself
};

Tensor2 encode_onehot(const ArchGraph& arch, const OpVocabulary& vocab);
std::pair<Tensor2, Tensor2> build_normalized_adjacency(const ArchGraph& arch,
                                                       AdjacencyNorm norm = AdjacencyNorm::kRowMean);
EncodedGraph encode_graph(const ArchGraph& arch, const OpVocabulary& vocab,
                          AdjacencyNorm norm = AdjacencyNorm::kRowMean);
/// Inverse of encode_graph: argmax of each feature row, edges from the
/// off-diagonal support of fwd_adj.
ArchGraph decode_graph(const EncodedGraph& encoded);

/// One-hot rows of all nodes (padded with all-zero rows up to max_nodes)
/// followed by the strict upper triangle of the padded adjacency, row-major.
std::vector<double> flatten_for_mlp(const ArchGraph& arch, const OpVocabulary& vocab, int max_nodes = 7);

enum class SpaceKind { kCell, kLinear, kSynthetic };

inline constexpr std::uint64_t kNasbenchCellCount = 423624;
inline constexpr int kCellMaxNodes = 7;
inline constexpr int kCellMaxEdges = 9;
inline constexpr int kLinearLayers = 22;
inline constexpr int kSyntheticNodes = 5;

/// A search space: vocabulary, validity rules, sampler and (where closed
/// form) cardinality.
///
///  - cell: NASBench-style cell with 2..7 nodes, input first, output last,
///    interior ops from {conv1x1, conv3x3, max-pool}, at most 9 edges and
///    every interior node on an input -> output path.
///  - linear: 22-layer chain, layer 0 picks one of 3 expansion-1 blocks, the
///    first layer of each later block cannot be "zero".
///  - synthetic: 5 nodes in a fixed chain with skips 0->2 and 2->4, each node
///    one of 4 ops (1024 architectures, small enough to enumerate).
class SearchSpace {
 public:
  static SearchSpace cell();
  static SearchSpace linear();
  static SearchSpace synthetic();
  /// "cell", "linear" or "synthetic".
  static SearchSpace from_name(std::string_view name);

  SpaceKind kind() const noexcept { return kind_; }
  std::string name() const;
  const OpVocabulary& vocab() const noexcept { return vocab_; }
  int max_nodes() const noexcept;
  bool fixed_topology() const noexcept { return kind_ != SpaceKind::kCell; }

  /// Empty string when valid, otherwise the first violated rule.
  std::string validation_error(const ArchGraph& arch) const;
  bool is_valid(const ArchGraph& arch) const { return validation_error(arch).empty(); }
  void validate(const ArchGraph& arch) const;

  /// Uniform over valid architectures (rejection sampling for the cell space).
  ArchGraph sample(Rng& rng) const;

  std::uint64_t cardinality() const;
  bool enumerable() const noexcept { return kind_ == SpaceKind::kSynthetic; }
  std::vector<ArchGraph> enumerate() const;

  /// Ops allowed at `node` of an architecture with `num_nodes` nodes.
  std::vector<int> allowed_ops(int node, int num_nodes) const;

 private:
  SearchSpace(SpaceKind kind, OpVocabulary vocab) : kind_(kind), vocab_(std::move(vocab)) {}

  SpaceKind kind_;
  OpVocabulary vocab_;
};

/// Layer indices (0-based) that open a block in the linear space.
std::span<const int> linear_block_first_layers();
bool is_linear_block_first(int layer);

/// Adjacency of the fixed synthetic topology.
ArchGraph synthetic_template();

/// `ops=<comma-separated indices>;adj=<row-major bits>`
std::string format_arch_text(const ArchGraph& arch);
ArchGraph parse_arch_text(std::string_view text);
/// "(0,0,6,...)" tuple of 22 linear-space layer ops.
ArchGraph parse_linear_tuple(std::string_view text);

}  // namespace npnas
