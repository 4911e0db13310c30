// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/benchmark_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "npnas/text.hpp"

namespace npnas {

namespace {

constexpr std::string_view kHeaderPrefix = "#R=3\tfields=";
constexpr std::string_view kFields = "hash,ops,adj,train_s,v1,t1,v2,t2,v3,t3";
constexpr std::string_view kLatencyField = ",latency_ms";
constexpr std::size_t kCalibrationSamples = 4096;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool accuracy_ok(double a) { return a > 0.0 && a <= 100.0; }

std::string ops_field(const ArchGraph& arch) {
  std::string s;
  for (int i = 0; i < arch.num_nodes(); ++i) {
    if (i) s += ',';
    s += std::to_string(arch.op(i));
  }
  return s;
}

std::string adj_field(const ArchGraph& arch) {
  std::string s;
  for (auto b : arch.adjacency()) s += b ? '1' : '0';
  return s;
}

void write_record(std::ostream& out, const ArchRecord& r, bool with_latency) {
  out << r.key.hex() << '\t' << ops_field(r.arch) << '\t' << adj_field(r.arch) << '\t'
      << format_double(r.train_seconds);
  for (int k = 0; k < kRunsPerArch; ++k) out << '\t' << format_double(r.val[k]) << '\t' << format_double(r.test[k]);
  if (with_latency) out << '\t' << format_double(r.latency_ms.value_or(0.0));
  out << '\n';
}

double name_quality(const std::string& name) {
  if (name == "conv3x3") return 1.0;
  if (name == "conv1x1") return 0.55;
  if (name == "max-pool") return 0.15;
  if (name == "skip") return 0.35;
  if (name == "zero") return -0.1;
  if (name.rfind("ib", 0) == 0 && name.size() == 7) {
    const int k = name[2] - '0';
    const int e = name[6] - '0';
    return 0.25 + 0.08 * (k - 3) + (e == 6 ? 0.12 : 0.0);
  }
  return 0.0;
}

double name_instability(const std::string& name) {
  if (name == "max-pool") return 1.0;
  if (name == "skip") return 0.75;
  if (name == "zero") return 0.9;
  if (name == "conv1x1") return 0.2;
  if (name == "ib3x3-3") return 0.3;
  return 0.0;
}

bool carries_op(const std::string& name) { return name != "input" && name != "output"; }

int longest_path(const ArchGraph& arch) {
  const auto order = arch.topological_order();
  if (!order) return 0;
  std::vector<int> depth(static_cast<std::size_t>(arch.num_nodes()), 0);
  for (int u : *order)
    for (int v = 0; v < arch.num_nodes(); ++v)
      if (arch.edge(u, v)) depth[v] = std::max(depth[v], depth[u] + 1);
  return depth.back();
}

}  // namespace

double op_cost(std::string_view name) {
  if (name == "conv3x3") return 9.0;
  if (name == "conv1x1") return 1.0;
  if (name == "max-pool") return 0.5;
  if (name.rfind("ib", 0) == 0 && name.size() == 7) {
    const int k = name[2] - '0';
    const int e = name[6] - '0';
    return static_cast<double>(k * k * e);
  }
  return 0.0;
}

double BenchmarkOracle::latency(const ArchGraph& arch) const {
  if (!has_latency()) throw LatencyUnavailableError("oracle has no latency model");
  return record(arch).latency_ms.value();
}

// ---------------------------------------------------------------------------
// Tabular

TabularOracle::TabularOracle(SearchSpace space, std::vector<ArchRecord> records)
    : space_(std::move(space)), records_(std::move(records)) {
  has_latency_ = !records_.empty();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].key, i).second) {
      throw ParseError("duplicate architecture " + records_[i].key.hex());
    }
    if (!records_[i].latency_ms) has_latency_ = false;
  }
}

TabularOracle TabularOracle::load(std::istream& in, SearchSpace space) {
  std::vector<ArchRecord> records;
  std::unordered_map<ArchKey, std::size_t, ArchKeyHash> seen;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool with_latency = false;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line.rfind(kHeaderPrefix, 0) != 0) throw fail("expected header '#R=3<TAB>fields=...'");
      const std::string_view fields = std::string_view(line).substr(kHeaderPrefix.size());
      if (fields == kFields) {
        with_latency = false;
      } else if (fields == std::string(kFields) + std::string(kLatencyField)) {
        with_latency = true;
      } else {
        throw fail("unsupported field list '" + std::string(fields) + "'");
      }
      have_header = true;
      continue;
    }
    const auto parts = split(line, '\t');
    const std::size_t expected = with_latency ? 11 : 10;
    if (parts.size() != expected) {
      throw fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(parts.size()));
    }
    ArchRecord r;
    try {
      std::vector<int> ops;
      for (auto p : split(parts[1], ',')) ops.push_back(static_cast<int>(parse_integer(p, "op")));
      const std::size_t n = ops.size();
      if (parts[2].size() != n * n) throw ParseError("adjacency must have " + std::to_string(n * n) + " bits");
      std::vector<std::uint8_t> adj;
      for (char c : parts[2]) {
        if (c != '0' && c != '1') throw ParseError("adjacency bits must be 0 or 1");
        adj.push_back(c == '1');
      }
      r.arch = ArchGraph(std::move(ops), std::move(adj));
      r.key = ArchKey::from_hex(parts[0]);
      r.train_seconds = parse_double(parts[3], "train_s");
      for (int k = 0; k < kRunsPerArch; ++k) {
        r.val[k] = parse_double(parts[4 + 2 * k], "val accuracy");
        r.test[k] = parse_double(parts[5 + 2 * k], "test accuracy");
      }
      if (with_latency) r.latency_ms = parse_double(parts[10], "latency_ms");
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    } catch (const ParseError& e) {
      throw fail(e.what());
    }
    if (canonical_hash(r.arch) != r.key) throw fail("hash does not match architecture");
    const std::string err = space.validation_error(r.arch);
    if (!err.empty()) throw fail(err);
    if (!(r.train_seconds > 0.0)) throw fail("train_s must be > 0");
    for (int k = 0; k < kRunsPerArch; ++k)
      if (!accuracy_ok(r.val[k]) || !accuracy_ok(r.test[k])) throw fail("accuracy outside (0, 100]");
    if (r.latency_ms && !(*r.latency_ms > 0.0)) throw fail("latency_ms must be > 0");
    if (!seen.emplace(r.key, records.size()).second) throw fail("duplicate key " + r.key.hex());
    records.push_back(std::move(r));
  }
  TabularOracle oracle(std::move(space), std::move(records));
  oracle.has_latency_ = with_latency && !oracle.records_.empty();
  return oracle;
}

TabularOracle TabularOracle::load_file(const std::string& path, SearchSpace space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open table '" + path + "'");
  return load(in, std::move(space));
}

void TabularOracle::dump(std::ostream& out) const {
  out << kHeaderPrefix << kFields;
  if (has_latency_) out << kLatencyField;
  out << '\n';
  for (const auto& r : records_) write_record(out, r, has_latency_);
}

bool TabularOracle::contains(const ArchGraph& arch) const { return index_.contains(canonical_hash(arch)); }

ArchRecord TabularOracle::record(const ArchGraph& arch) const {
  const auto it = index_.find(canonical_hash(arch));
  if (it == index_.end()) throw MissingArchError("MISSING_ARCH: " + format_arch_text(arch));
  return records_[it->second];
}

std::optional<std::vector<ArchGraph>> TabularOracle::domain() const {
  std::vector<ArchGraph> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.arch);
  return out;
}

ArchGraph TabularOracle::sample(Rng& rng) const {
  if (records_.empty()) throw MissingArchError("MISSING_ARCH: table is empty");
  return records_[rng.below(static_cast<std::uint64_t>(records_.size()))].arch;
}

// ---------------------------------------------------------------------------
// Synthetic

SyntheticOracle::SyntheticOracle(const SyntheticSpec& spec)
    : spec_(spec),
      space_(spec.space == SpaceKind::kCell     ? SearchSpace::cell()
             : spec.space == SpaceKind::kLinear ? SearchSpace::linear()
                                                : SearchSpace::synthetic()) {
  if (!(spec.noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be >= 0");
  if (!(spec.bad_fraction >= 0.0 && spec.bad_fraction < 1.0)) {
    throw std::invalid_argument("bad_fraction must be in [0, 1)");
  }
  const auto& vocab = space_.vocab();
  const std::size_t v = vocab.size();
  Rng rng(derive_seed(spec.seed, 0x6c616e64));
  for (std::size_t i = 0; i < v; ++i) {
    const auto& name = vocab.name(static_cast<int>(i));
    op_quality_.push_back(carries_op(name) ? name_quality(name) + 0.08 * rng.normal() : 0.0);
    op_instability_.push_back(name_instability(name));
    op_cost_.push_back(op_cost(name));
  }
  pair_.resize(v * v);
  for (double& p : pair_) p = 0.25 * rng.normal();

  std::vector<ArchGraph> calib;
  if (space_.enumerable()) {
    calib = space_.enumerate();
  } else {
    Rng crng(derive_seed(spec.seed, 0x63616c6962));
    calib.reserve(kCalibrationSamples);
    for (std::size_t i = 0; i < kCalibrationSamples; ++i) calib.push_back(space_.sample(crng));
  }
  const auto n = static_cast<double>(calib.size());
  std::vector<double> scores, instab, costs;
  for (const auto& a : calib) {
    scores.push_back(raw_score(a));
    instab.push_back(instability(a));
    costs.push_back(cost(a));
  }
  auto mean_sd = [n](const std::vector<double>& xs) {
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / n)};
  };
  const auto [sm, ss] = mean_sd(scores);
  score_mean_ = sm;
  score_sd_ = ss > 0.0 ? ss : 1.0;

  if (spec.bad_fraction > 0.0) {
    std::vector<double> sorted = instab;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::floor((1.0 - spec.bad_fraction) * (n - 1)));
    bad_cut_ = sorted[idx];
    // On a tie plateau take whichever neighbouring cut is nearer the target.
    const auto above = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), bad_cut_));
    if (idx > 0) {
      const double lower = sorted[idx - 1];
      const auto above_lower =
          static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), lower));
      if (std::abs(above_lower / n - spec.bad_fraction) < std::abs(above / n - spec.bad_fraction)) bad_cut_ = lower;
    }
  } else {
    bad_cut_ = std::numeric_limits<double>::infinity();
  }

  const auto [cm, cs] = mean_sd(costs);
  latency_scale_ = cs > 0.0 ? 5.0 / cs : 0.0;
  latency_base_ = 80.0 - latency_scale_ * cm;

  for (const auto& a : calib) sorted_accuracy_.push_back(base_accuracy(a));
  std::sort(sorted_accuracy_.begin(), sorted_accuracy_.end());
}

double SyntheticOracle::raw_score(const ArchGraph& arch) const {
  const int n = arch.num_nodes();
  const std::size_t v = op_quality_.size();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pos = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    s += op_quality_[static_cast<std::size_t>(arch.op(i))] * (1.0 + 0.5 * pos);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (arch.edge(i, j)) s += pair_[static_cast<std::size_t>(arch.op(i)) * v + static_cast<std::size_t>(arch.op(j))];
  if (!space_.fixed_topology()) s += 0.3 * longest_path(arch);
  return s;
}

double SyntheticOracle::instability(const ArchGraph& arch) const {
  const auto& vocab = space_.vocab();
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < arch.num_nodes(); ++i) {
    if (!carries_op(vocab.name(arch.op(i)))) continue;
    total += op_instability_[static_cast<std::size_t>(arch.op(i))] * (1.0 + 0.07 * i);
    ++count;
  }
  return count ? total / count : 0.0;
}

double SyntheticOracle::cost(const ArchGraph& arch) const {
  double c = 0.0;
  for (int op : arch.ops()) c += op_cost_[static_cast<std::size_t>(op)];
  return c;
}

bool SyntheticOracle::is_bad(const ArchGraph& arch) const { return instability(arch) > bad_cut_; }

double SyntheticOracle::base_accuracy(const ArchGraph& arch) const {
  const double z = (raw_score(arch) - score_mean_) / score_sd_;
  const double s = logistic(spec_.sharpness * z + spec_.offset);
  return is_bad(arch) ? 10.0 + 10.0 * s : 10.0 + 86.0 * s;
}

double SyntheticOracle::accuracy_quantile(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted_accuracy_.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_accuracy_.size() - 1);
  return sorted_accuracy_[lo] + (pos - static_cast<double>(lo)) * (sorted_accuracy_[hi] - sorted_accuracy_[lo]);
}

ArchRecord SyntheticOracle::record(const ArchGraph& arch) const {
  const std::string err = space_.validation_error(arch);
  if (!err.empty()) throw MissingArchError("MISSING_ARCH: " + err);
  ArchRecord r;
  r.arch = arch;
  r.key = canonical_hash(arch);
  const double f = base_accuracy(arch);
  const double c = cost(arch);
  r.train_seconds = 400.0 + 600.0 * c / arch.num_nodes();
  for (int k = 0; k < kRunsPerArch; ++k) {
    Rng run_rng(derive_seed(derive_seed(spec_.seed, r.key.value), static_cast<std::uint64_t>(k)));
    const double dv = spec_.noise_sd * run_rng.normal();
    const double dt = spec_.noise_sd * run_rng.normal();
    r.val[k] = std::clamp(f + dv, 0.01, 100.0);
    r.test[k] = std::clamp(f + dt, 0.01, 100.0);
  }
  if (spec_.latency) r.latency_ms = std::max(1.0, latency_base_ + latency_scale_ * c);
  return r;
}

std::optional<std::vector<ArchGraph>> SyntheticOracle::domain() const {
  if (!space_.enumerable()) return std::nullopt;
  return space_.enumerate();
}

void SyntheticOracle::dump_table(std::ostream& out, std::size_t count) const {
  std::vector<ArchGraph> archs;
  if (space_.enumerable() && count == 0) {
    archs = space_.enumerate();
  } else {
    if (count == 0) throw std::invalid_argument("dump_table: count required for a non-enumerable space");
    Rng rng(derive_seed(spec_.seed, 0x64756d70));
    std::unordered_map<ArchKey, char, ArchKeyHash> seen;
    std::size_t misses = 0;
    while (archs.size() < count && misses < 100000) {
      ArchGraph a = space_.sample(rng);
      if (seen.emplace(canonical_hash(a), 0).second) {
        archs.push_back(std::move(a));
        misses = 0;
      } else {
        ++misses;
      }
    }
  }
  out << kHeaderPrefix << kFields;
  if (spec_.latency) out << kLatencyField;
  out << '\n';
  for (const auto& a : archs) write_record(out, record(a), spec_.latency);
}

std::unique_ptr<BenchmarkOracle> make_synthetic_oracle(const SyntheticSpec& spec) {
  return std::make_unique<SyntheticOracle>(spec);
}

// ---------------------------------------------------------------------------
// Replica view

int ReplicaOracle::run_index(const ArchGraph& arch) {
  const ArchKey key = canonical_hash(arch);
  const auto it = runs_.find(key);
  if (it != runs_.end()) return it->second;
  Rng rng(derive_seed(seed_, key.value));
  const int run = rng.below(kRunsPerArch);
  runs_.emplace(key, run);
  return run;
}

SignalReply ReplicaOracle::search_signal(const ArchGraph& arch) {
  const ArchRecord r = oracle_->record(arch);
  const int run = run_index(arch);
  return SignalReply{r.val[static_cast<std::size_t>(run)], r.train_seconds, run};
}

ArchGraph sample_in_latency_window(const BenchmarkOracle& oracle, Rng& rng, double lo_ms, double hi_ms) {
  if (!(lo_ms <= hi_ms)) throw std::invalid_argument("latency window must have lo <= hi");
  auto inside = [&](const ArchGraph& a) {
    const double l = oracle.latency(a);
    return l >= lo_ms && l <= hi_ms;
  };
  if (auto dom = oracle.domain()) {
    std::vector<const ArchGraph*> ok;
    for (const auto& a : *dom)
      if (inside(a)) ok.push_back(&a);
    if (ok.empty()) throw std::runtime_error("latency window is empty");
    return *ok[rng.below(static_cast<std::uint64_t>(ok.size()))];
  }
  for (int tries = 0; tries < 200000; ++tries) {
    ArchGraph a = oracle.sample(rng);
    if (inside(a)) return a;
  }
  throw std::runtime_error("latency window appears empty after 200000 draws");
}

}  // namespace npnas
