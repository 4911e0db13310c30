// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/arch_graph.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <unordered_set>

namespace npnas {

// ---------------------------------------------------------------------------
// OpVocabulary

OpVocabulary::OpVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw std::invalid_argument("OpVocabulary: at least one op required");
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw std::invalid_argument("OpVocabulary: duplicate op '" + n + "'");
  }
}

OpVocabulary OpVocabulary::cell() { return OpVocabulary({"input", "conv1x1", "conv3x3", "max-pool", "output"}); }

OpVocabulary OpVocabulary::linear() {
  return OpVocabulary({"ib3x3-3", "ib5x5-3", "ib7x7-3", "ib3x3-6", "ib5x5-6", "ib7x7-6", "zero"});
}

OpVocabulary OpVocabulary::synthetic() { return OpVocabulary({"conv3x3", "conv1x1", "max-pool", "skip"}); }

int OpVocabulary::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

// ---------------------------------------------------------------------------
// ArchGraph

ArchGraph::ArchGraph(std::vector<int> ops, std::vector<std::uint8_t> adjacency)
    : ops_(std::move(ops)), adjacency_(std::move(adjacency)) {
  const std::size_t n = ops_.size();
  if (adjacency_.size() != n * n) {
    throw InvalidArchError("ArchGraph: adjacency has " + std::to_string(adjacency_.size()) +
                           " entries, expected " + std::to_string(n * n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency_[i * n + i]) throw InvalidArchError("ArchGraph: self-loop at node " + std::to_string(i));
  }
  for (auto& a : adjacency_) a = a ? 1 : 0;
}

ArchGraph ArchGraph::chain(std::vector<int> ops) {
  const std::size_t n = ops.size();
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) adj[i * n + i + 1] = 1;
  return ArchGraph(std::move(ops), std::move(adj));
}

void ArchGraph::set_edge(int from, int to, bool present) {
  if (from == to) throw InvalidArchError("ArchGraph: self-loop at node " + std::to_string(from));
  adjacency_.at(static_cast<std::size_t>(from * num_nodes() + to)) = present ? 1 : 0;
}

int ArchGraph::num_edges() const {
  return static_cast<int>(std::count(adjacency_.begin(), adjacency_.end(), std::uint8_t{1}));
}

std::optional<std::vector<int>> ArchGraph::topological_order() const {
  const int n = num_nodes();
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (edge(i, j)) ++indegree[j];
  std::deque<int> ready;
  for (int i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    const int u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (int v = 0; v < n; ++v) {
      if (edge(u, v) && --indegree[v] == 0) ready.push_back(v);
    }
  }
  if (static_cast<int>(order.size()) != n) return std::nullopt;
  return order;
}

ArchGraph ArchGraph::permuted(std::span<const int> perm) const {
  const int n = num_nodes();
  if (static_cast<int>(perm.size()) != n) throw InvalidArchError("permuted: permutation size mismatch");
  std::vector<int> ops(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> adj(static_cast<std::size_t>(n * n), 0);
  for (int i = 0; i < n; ++i) {
    ops[perm[i]] = ops_[i];
    for (int j = 0; j < n; ++j)
      if (edge(i, j)) adj[perm[i] * n + perm[j]] = 1;
  }
  return ArchGraph(std::move(ops), std::move(adj));
}

// ---------------------------------------------------------------------------
// Hashing

std::string ArchKey::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[15 - i] = kDigits[(value >> (4 * i)) & 0xf];
  return s;
}

ArchKey ArchKey::from_hex(std::string_view text) {
  ArchKey k;
  if (text.size() != 16) throw ParseError("hash must be 16 hex digits: '" + std::string(text) + "'");
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k.value, 16);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("bad hash '" + std::string(text) + "'");
  }
  return k;
}

ArchKey canonical_hash(const ArchGraph& arch) {
  // FNV-1a over a fixed byte serialization, then a SplitMix finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  feed(static_cast<std::uint8_t>(arch.num_nodes()));
  for (int op : arch.ops()) {
    const auto u = static_cast<std::uint32_t>(op);
    for (int b = 0; b < 4; ++b) feed(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  for (std::uint8_t bit : arch.adjacency()) feed(bit);
  return ArchKey{mix64(h)};
}

// ---------------------------------------------------------------------------
// Encoding

Tensor2 encode_onehot(const ArchGraph& arch, const OpVocabulary& vocab) {
  Tensor2 x(static_cast<std::size_t>(arch.num_nodes()), vocab.size());
  for (int i = 0; i < arch.num_nodes(); ++i) {
    const int op = arch.op(i);
    if (op < 0 || static_cast<std::size_t>(op) >= vocab.size()) {
      throw InvalidArchError("encode_onehot: op index " + std::to_string(op) + " at node " + std::to_string(i) +
                             " outside vocabulary of size " + std::to_string(vocab.size()));
    }
    x(static_cast<std::size_t>(i), static_cast<std::size_t>(op)) = 1.0;
  }
  return x;
}

namespace {

Tensor2 normalize(Tensor2 m, AdjacencyNorm norm) {
  const std::size_t n = m.rows();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += m(i, j);
  if (norm == AdjacencyNorm::kRowMean) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) /= deg[i];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) /= std::sqrt(deg[i] * deg[j]);
  }
  return m;
}

}  // namespace

std::pair<Tensor2, Tensor2> build_normalized_adjacency(const ArchGraph& arch, AdjacencyNorm norm) {
  const auto n = static_cast<std::size_t>(arch.num_nodes());
  // fwd(i, j) = A(j, i) + I : node i listens to its predecessors.
  Tensor2 fwd(n, n), bwd(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    fwd(i, i) = 1.0;
    bwd(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (arch.edge(static_cast<int>(j), static_cast<int>(i))) fwd(i, j) = 1.0;
      if (arch.edge(static_cast<int>(i), static_cast<int>(j))) bwd(i, j) = 1.0;
    }
  }
  return {normalize(std::move(fwd), norm), normalize(std::move(bwd), norm)};
}

EncodedGraph encode_graph(const ArchGraph& arch, const OpVocabulary& vocab, AdjacencyNorm norm) {
  auto [fwd, bwd] = build_normalized_adjacency(arch, norm);
  return EncodedGraph{encode_onehot(arch, vocab), std::move(fwd), std::move(bwd)};
}

ArchGraph decode_graph(const EncodedGraph& encoded) {
  const std::size_t n = encoded.features.rows();
  std::vector<int> ops(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < encoded.features.cols(); ++c)
      if (encoded.features(i, c) > encoded.features(i, best)) best = c;
    ops[i] = static_cast<int>(best);
  }
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && encoded.fwd_adj(i, j) > 0.0) adj[j * n + i] = 1;
  return ArchGraph(std::move(ops), std::move(adj));
}

std::vector<double> flatten_for_mlp(const ArchGraph& arch, const OpVocabulary& vocab, int max_nodes) {
  const int n = arch.num_nodes();
  if (n > max_nodes) {
    throw InvalidArchError("flatten_for_mlp: " + std::to_string(n) + " nodes exceeds maximum " +
                           std::to_string(max_nodes));
  }
  const std::size_t d0 = vocab.size();
  const auto m = static_cast<std::size_t>(max_nodes);
  std::vector<double> out(m * d0 + m * (m - 1) / 2, 0.0);
  const Tensor2 onehot = encode_onehot(arch, vocab);
  std::copy(onehot.data().begin(), onehot.data().end(), out.begin());
  std::size_t pos = m * d0;
  for (int i = 0; i < max_nodes; ++i) {
    for (int j = i + 1; j < max_nodes; ++j, ++pos) {
      if (i < n && j < n && arch.edge(i, j)) out[pos] = 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search spaces

namespace {

constexpr std::array<int, 6> kLinearBlockFirst{1, 5, 9, 13, 17, 21};

// Cell adjacency restricted to the strict upper triangle, bit k enumerating
// pairs (i, j), i < j, in row-major order.
bool cell_mask_valid(int n, std::uint32_t mask) {
  if (std::popcount(mask) > kCellMaxEdges) return false;
  std::array<std::uint32_t, kCellMaxNodes> out{};
  int bit = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++bit)
      if (mask & (1u << bit)) out[i] |= 1u << j;
  std::uint32_t fwd = 1u;
  for (int i = 0; i < n; ++i)
    if (fwd & (1u << i)) fwd |= out[i];
  std::uint32_t bwd = 1u << (n - 1);
  for (int i = n - 1; i >= 0; --i)
    if (out[i] & bwd) bwd |= 1u << i;
  const std::uint32_t all = (1u << n) - 1;
  return (fwd & bwd) == all;
}

// Number of valid upper-triangular adjacency patterns for each node count.
const std::array<std::uint64_t, kCellMaxNodes + 1>& cell_adjacency_counts() {
  static const auto counts = [] {
    std::array<std::uint64_t, kCellMaxNodes + 1> c{};
    for (int n = 2; n <= kCellMaxNodes; ++n) {
      const int pairs = n * (n - 1) / 2;
      for (std::uint32_t mask = 0; mask < (1u << pairs); ++mask)
        if (cell_mask_valid(n, mask)) ++c[n];
    }
    return c;
  }();
  return counts;
}

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

std::span<const int> linear_block_first_layers() { return kLinearBlockFirst; }

bool is_linear_block_first(int layer) {
  return std::find(kLinearBlockFirst.begin(), kLinearBlockFirst.end(), layer) != kLinearBlockFirst.end();
}

ArchGraph synthetic_template() {
  ArchGraph g = ArchGraph::chain(std::vector<int>(kSyntheticNodes, 0));
  g.set_edge(0, 2, true);
  g.set_edge(2, 4, true);
  return g;
}

SearchSpace SearchSpace::cell() { return SearchSpace(SpaceKind::kCell, OpVocabulary::cell()); }
SearchSpace SearchSpace::linear() { return SearchSpace(SpaceKind::kLinear, OpVocabulary::linear()); }
SearchSpace SearchSpace::synthetic() { return SearchSpace(SpaceKind::kSynthetic, OpVocabulary::synthetic()); }

SearchSpace SearchSpace::from_name(std::string_view name) {
  if (name == "cell") return cell();
  if (name == "linear") return linear();
  if (name == "synthetic") return synthetic();
  throw std::invalid_argument("unknown search space '" + std::string(name) + "'");
}

std::string SearchSpace::name() const {
  switch (kind_) {
    case SpaceKind::kCell:
      return "cell";
    case SpaceKind::kLinear:
      return "linear";
    case SpaceKind::kSynthetic:
      return "synthetic";
  }
  return "?";
}

int SearchSpace::max_nodes() const noexcept {
  switch (kind_) {
    case SpaceKind::kCell:
      return kCellMaxNodes;
    case SpaceKind::kLinear:
      return kLinearLayers;
    case SpaceKind::kSynthetic:
      return kSyntheticNodes;
  }
  return 0;
}

std::vector<int> SearchSpace::allowed_ops(int node, int num_nodes) const {
  switch (kind_) {
    case SpaceKind::kCell:
      if (node == 0) return {0};
      if (node == num_nodes - 1) return {4};
      return {1, 2, 3};
    case SpaceKind::kLinear:
      if (node == 0) return {0, 1, 2};
      if (is_linear_block_first(node)) return {0, 1, 2, 3, 4, 5};
      return {0, 1, 2, 3, 4, 5, 6};
    case SpaceKind::kSynthetic:
      return {0, 1, 2, 3};
  }
  return {};
}

std::string SearchSpace::validation_error(const ArchGraph& arch) const {
  const int n = arch.num_nodes();
  auto op_ok = [&](int i) {
    const auto allowed = allowed_ops(i, n);
    return std::find(allowed.begin(), allowed.end(), arch.op(i)) != allowed.end();
  };
  switch (kind_) {
    case SpaceKind::kCell: {
      if (n < 2 || n > kCellMaxNodes) return "cell must have 2..7 nodes, got " + std::to_string(n);
      for (int i = 0; i < n; ++i)
        if (!op_ok(i)) return "op " + std::to_string(arch.op(i)) + " not allowed at node " + std::to_string(i);
      if (arch.num_edges() > kCellMaxEdges) return "more than 9 edges";
      if (!arch.is_acyclic()) return "graph has a cycle";
      // Every node must be reachable from the input and reach the output.
      std::vector<char> from_in(static_cast<std::size_t>(n), 0), to_out(static_cast<std::size_t>(n), 0);
      std::vector<int> stack{0};
      from_in[0] = 1;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < n; ++v)
          if (arch.edge(u, v) && !from_in[v]) from_in[v] = 1, stack.push_back(v);
      }
      stack = {n - 1};
      to_out[n - 1] = 1;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < n; ++v)
          if (arch.edge(v, u) && !to_out[v]) to_out[v] = 1, stack.push_back(v);
      }
      for (int i = 0; i < n; ++i)
        if (!from_in[i] || !to_out[i]) return "node " + std::to_string(i) + " is not on an input->output path";
      return {};
    }
    case SpaceKind::kLinear: {
      if (n != kLinearLayers) return "linear architecture must have 22 layers, got " + std::to_string(n);
      if (arch != ArchGraph::chain(arch.ops())) return "linear architecture must be a chain";
      for (int i = 0; i < n; ++i)
        if (!op_ok(i)) return "op " + std::to_string(arch.op(i)) + " not allowed at layer " + std::to_string(i);
      return {};
    }
    case SpaceKind::kSynthetic: {
      if (n != kSyntheticNodes) return "synthetic architecture must have 5 nodes, got " + std::to_string(n);
      if (arch.adjacency() != synthetic_template().adjacency()) return "synthetic topology is fixed";
      for (int i = 0; i < n; ++i)
        if (!op_ok(i)) return "op " + std::to_string(arch.op(i)) + " not allowed at node " + std::to_string(i);
      return {};
    }
  }
  return "unknown space";
}

void SearchSpace::validate(const ArchGraph& arch) const {
  const std::string err = validation_error(arch);
  if (!err.empty()) throw InvalidArchError(name() + " space: " + err);
}

ArchGraph SearchSpace::sample(Rng& rng) const {
  switch (kind_) {
    case SpaceKind::kCell: {
      // Pick the node count with probability proportional to the number of
      // valid labelled cells of that size, then rejection-sample the edges.
      const auto& counts = cell_adjacency_counts();
      std::array<double, kCellMaxNodes + 1> weight{};
      double total = 0.0;
      for (int n = 2; n <= kCellMaxNodes; ++n) {
        weight[n] = static_cast<double>(counts[n]) * std::pow(3.0, n - 2);
        total += weight[n];
      }
      double u = rng.uniform() * total;
      int n = kCellMaxNodes;
      for (int k = 2; k <= kCellMaxNodes; ++k) {
        if (u < weight[k]) {
          n = k;
          break;
        }
        u -= weight[k];
      }
      const int pairs = n * (n - 1) / 2;
      std::uint32_t mask;
      do {
        mask = static_cast<std::uint32_t>(rng.next() & ((1ULL << pairs) - 1));
      } while (!cell_mask_valid(n, mask));
      std::vector<int> ops(static_cast<std::size_t>(n));
      ops.front() = 0;
      ops.back() = 4;
      for (int i = 1; i < n - 1; ++i) ops[i] = 1 + rng.below(3);
      std::vector<std::uint8_t> adj(static_cast<std::size_t>(n * n), 0);
      int bit = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++bit)
          if (mask & (1u << bit)) adj[i * n + j] = 1;
      return ArchGraph(std::move(ops), std::move(adj));
    }
    case SpaceKind::kLinear: {
      std::vector<int> ops(kLinearLayers);
      for (int i = 0; i < kLinearLayers; ++i) {
        const auto allowed = allowed_ops(i, kLinearLayers);
        ops[i] = allowed[rng.below(static_cast<int>(allowed.size()))];
      }
      return ArchGraph::chain(std::move(ops));
    }
    case SpaceKind::kSynthetic: {
      ArchGraph g = synthetic_template();
      for (int i = 0; i < kSyntheticNodes; ++i) g.set_op(i, rng.below(4));
      return g;
    }
  }
  throw std::logic_error("unreachable");
}

std::uint64_t SearchSpace::cardinality() const {
  switch (kind_) {
    case SpaceKind::kCell:
      return kNasbenchCellCount;
    case SpaceKind::kLinear:
      return 3 * ipow(6, 6) * ipow(7, 15);
    case SpaceKind::kSynthetic:
      return ipow(4, kSyntheticNodes);
  }
  throw std::invalid_argument("cardinality: unsupported space");
}

std::vector<ArchGraph> SearchSpace::enumerate() const {
  if (!enumerable()) throw std::invalid_argument(name() + " space is not enumerable");
  std::vector<ArchGraph> out;
  const ArchGraph base = synthetic_template();
  const auto total = cardinality();
  out.reserve(total);
  for (std::uint64_t code = 0; code < total; ++code) {
    ArchGraph g = base;
    std::uint64_t c = code;
    for (int i = kSyntheticNodes - 1; i >= 0; --i) {
      g.set_op(i, static_cast<int>(c % 4));
      c /= 4;
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("bad " + std::string(what) + " value '" + std::string(s) + "'");
  }
  return v;
}

std::vector<int> parse_int_list(std::string_view s, std::string_view what) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const std::string_view item = s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start);
    out.push_back(parse_int(item, what));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string format_arch_text(const ArchGraph& arch) {
  std::string s = "ops=";
  for (int i = 0; i < arch.num_nodes(); ++i) {
    if (i) s += ',';
    s += std::to_string(arch.op(i));
  }
  s += ";adj=";
  for (std::uint8_t bit : arch.adjacency()) s += bit ? '1' : '0';
  return s;
}

ArchGraph parse_arch_text(std::string_view text) {
  constexpr std::string_view kOps = "ops=";
  constexpr std::string_view kAdj = ";adj=";
  if (!text.starts_with(kOps)) throw ParseError("architecture text must start with 'ops='");
  const std::size_t sep = text.find(kAdj);
  if (sep == std::string_view::npos) throw ParseError("architecture text missing ';adj='");
  std::vector<int> ops = parse_int_list(text.substr(kOps.size(), sep - kOps.size()), "op");
  const std::string_view bits = text.substr(sep + kAdj.size());
  if (bits.size() != ops.size() * ops.size()) {
    throw ParseError("adjacency has " + std::to_string(bits.size()) + " bits, expected " +
                     std::to_string(ops.size() * ops.size()));
  }
  std::vector<std::uint8_t> adj(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw ParseError("adjacency bits must be 0 or 1");
    adj[i] = bits[i] == '1';
  }
  try {
    return ArchGraph(std::move(ops), std::move(adj));
  } catch (const InvalidArchError& e) {
    throw ParseError(e.what());
  }
}

ArchGraph parse_linear_tuple(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw ParseError("linear tuple must be parenthesised");
  }
  std::string compact;
  for (char c : text.substr(1, text.size() - 2))
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  std::vector<int> ops = parse_int_list(compact, "layer op");
  if (ops.size() != static_cast<std::size_t>(kLinearLayers)) {
    throw ParseError("linear tuple must have 22 entries, got " + std::to_string(ops.size()));
  }
  return ArchGraph::chain(std::move(ops));
}

}  // namespace npnas
