// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/search_strategies.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace npnas {

namespace {

constexpr std::size_t kMaxConsecutiveMisses = 10000;
constexpr int kMaxMutationAttempts = 100000;

struct Member {
  ArchGraph arch;
  double val = 0.0;
  int birth = 0;
};

}  // namespace

void Budget::validate() const {
  if (max_models.has_value() == max_seconds.has_value()) {
    throw std::invalid_argument("budget: exactly one of max_models and max_seconds must be set");
  }
  if (max_models && *max_models < 1) throw std::invalid_argument("budget: max_models must be >= 1");
  if (max_seconds && !(*max_seconds > 0.0)) throw std::invalid_argument("budget: max_seconds must be > 0");
}

// ---------------------------------------------------------------------------
// Session

SearchSession::SearchSession(const BenchmarkOracle& oracle, Budget budget, std::uint64_t replica_seed,
                             bool allow_repeats)
    : replica_(oracle, replica_seed), budget_(budget), allow_repeats_(allow_repeats) {
  budget_.validate();
}

bool SearchSession::can_train() const {
  if (budget_.max_models) return static_cast<int>(events_.size()) < *budget_.max_models;
  return seconds_ < *budget_.max_seconds;
}

double SearchSession::train(const ArchGraph& arch) {
  if (!can_train()) throw BudgetExhaustedError("search budget exhausted");
  const ArchKey key = canonical_hash(arch);
  if (!allow_repeats_ && seen_.contains(key)) {
    throw std::logic_error("architecture " + key.hex() + " trained twice in one search");
  }
  const SignalReply reply = replica_.search_signal(arch);
  seconds_ += reply.cost_seconds;
  TrajectoryEvent ev;
  ev.model_index = static_cast<int>(events_.size());
  ev.cumulative_seconds = seconds_;
  ev.key = key;
  ev.val_acc = reply.val_acc;
  events_.push_back(ev);
  archs_.push_back(arch);
  seen_.insert(key);
  return reply.val_acc;
}

Trajectory SearchSession::finish(std::string strategy, bool exhausted) const {
  if (events_.empty()) throw std::logic_error("search finished without training any model");
  Trajectory t;
  t.strategy = std::move(strategy);
  t.exhausted = exhausted;
  t.total_seconds = seconds_;
  t.events = events_;
  std::unordered_map<ArchKey, double, ArchKeyHash> reports;
  auto report = [&](std::size_t i) {
    const auto it = reports.find(events_[i].key);
    if (it != reports.end()) return it->second;
    const double r = oracle().final_report(archs_[i]);
    reports.emplace(events_[i].key, r);
    return r;
  };
  std::size_t best = 0;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& e = events_[i];
    const auto& b = events_[best];
    if (e.val_acc > b.val_acc || (e.val_acc == b.val_acc && e.key < b.key)) best = i;
    t.events[i].selected_val = events_[best].val_acc;
    t.events[i].selected_test = report(best);
  }
  t.final.arch = archs_[best];
  t.final.key = events_[best].key;
  t.final.val_acc = events_[best].val_acc;
  t.final.test_acc = report(best);
  return t;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<ArchGraph> sample_distinct(const BenchmarkOracle& oracle, Rng& rng, std::size_t count,
                                       const std::unordered_set<ArchKey, ArchKeyHash>& exclude,
                                       const std::function<bool(const ArchGraph&)>& accept, bool* exhausted) {
  std::vector<ArchGraph> out;
  if (auto dom = oracle.domain()) {
    std::vector<ArchGraph> eligible;
    for (auto& a : *dom)
      if (!exclude.contains(canonical_hash(a)) && (!accept || accept(a))) eligible.push_back(std::move(a));
    const std::size_t take = std::min(count, eligible.size());
    // Partial Fisher-Yates: the first `take` slots are a uniform draw.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.below(static_cast<std::uint64_t>(eligible.size() - i));
      std::swap(eligible[i], eligible[j]);
    }
    eligible.resize(take);
    out = std::move(eligible);
  } else {
    std::unordered_set<ArchKey, ArchKeyHash> taken;
    std::size_t misses = 0;
    while (out.size() < count && misses < kMaxConsecutiveMisses) {
      ArchGraph a = oracle.sample(rng);
      const ArchKey k = canonical_hash(a);
      if (exclude.contains(k) || taken.contains(k) || (accept && !accept(a))) {
        ++misses;
        continue;
      }
      misses = 0;
      taken.insert(k);
      out.push_back(std::move(a));
    }
  }
  if (exhausted) *exhausted = out.size() < count;
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

Trajectory random_search(const BenchmarkOracle& oracle, Budget budget, std::uint64_t seed) {
  SearchSession session(oracle, budget, seed);
  Rng rng(derive_seed(seed, 0x72616e64));
  bool exhausted = false;
  if (budget.max_models) {
    const auto picks = sample_distinct(oracle, rng, static_cast<std::size_t>(*budget.max_models), {}, {}, &exhausted);
    for (const auto& a : picks) session.train(a);
  } else {
    while (session.can_train()) {
      const auto pick = sample_distinct(oracle, rng, 1, session.trained_keys(), {}, &exhausted);
      if (pick.empty()) break;
      session.train(pick.front());
    }
  }
  return session.finish("random", exhausted);
}

Trajectory oracle_search(const BenchmarkOracle& oracle, std::uint64_t seed) {
  auto dom = oracle.domain();
  if (!dom) throw std::invalid_argument("oracle search needs an enumerable search space");
  if (dom->empty()) throw std::invalid_argument("oracle search over an empty domain");
  SearchSession session(oracle, Budget::models(static_cast<int>(dom->size())), seed);
  for (const auto& a : *dom) session.train(a);
  return session.finish("oracle");
}

// ---------------------------------------------------------------------------
// Evolution

void EvolutionConfig::validate() const {
  if (population_size < 1) throw std::invalid_argument("evolution: population_size must be >= 1");
  if (sample_size < 1 || sample_size > population_size) {
    throw std::invalid_argument("evolution: sample_size must be in [1, population_size]");
  }
  if (!(p_edge >= 0.0 && p_edge <= 1.0) || !(p_node >= 0.0 && p_node <= 1.0)) {
    throw std::invalid_argument("evolution: mutation probabilities must be in [0, 1]");
  }
  if (p_edge == 0.0 && p_node == 0.0) throw std::invalid_argument("evolution: mutation probabilities are both 0");
}

ArchGraph mutate(const ArchGraph& parent, const SearchSpace& space, const EvolutionConfig& cfg, Rng& rng,
                 MutationStats* stats) {
  const int n = parent.num_nodes();
  MutationStats local;
  MutationStats& st = stats ? *stats : local;
  for (int attempt = 0; attempt < kMaxMutationAttempts; ++attempt) {
    ++st.attempts;
    ArchGraph child = parent;
    if (!space.fixed_topology()) {
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          ++st.edge_trials;
          if (rng.bernoulli(cfg.p_edge)) {
            ++st.edge_flips;
            child.set_edge(i, j, !child.edge(i, j));
          }
        }
    }
    for (int i = 0; i < n; ++i) {
      const auto allowed = space.allowed_ops(i, n);
      if (allowed.size() < 2) continue;
      ++st.node_trials;
      if (!rng.bernoulli(cfg.p_node)) continue;
      ++st.node_changes;
      std::vector<int> others;
      for (int op : allowed)
        if (op != child.op(i)) others.push_back(op);
      child.set_op(i, others[rng.below(static_cast<int>(others.size()))]);
    }
    if (child != parent && space.is_valid(child)) {
      ++st.children;
      return child;
    }
  }
  throw std::runtime_error("mutate: no valid child after " + std::to_string(kMaxMutationAttempts) + " attempts");
}

Trajectory regularized_evolution(const BenchmarkOracle& oracle, Budget budget, const EvolutionConfig& cfg,
                                 std::uint64_t seed, EvolutionTrace* trace) {
  cfg.validate();
  SearchSession session(oracle, budget, seed, /*allow_repeats=*/true);
  Rng rng(derive_seed(seed, 0x65766f));
  std::deque<Member> population;
  int births = 0;

  const auto init = sample_distinct(oracle, rng, static_cast<std::size_t>(cfg.population_size));
  for (const auto& a : init) {
    if (!session.can_train()) break;
    population.push_back(Member{a, session.train(a), births++});
  }

  std::vector<std::size_t> idx;
  while (session.can_train() && !population.empty()) {
    idx.resize(population.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto s = std::min(static_cast<std::size_t>(cfg.sample_size), idx.size());
    for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.below(static_cast<std::uint64_t>(idx.size() - i))]);
    std::size_t parent = idx[0];
    for (std::size_t i = 1; i < s; ++i) {
      const Member& c = population[idx[i]];
      const Member& p = population[parent];
      if (c.val > p.val || (c.val == p.val && c.birth < p.birth)) parent = idx[i];
    }
    ArchGraph child = mutate(population[parent].arch, oracle.space(), cfg, rng, trace ? &trace->mutation : nullptr);
    const double val = session.train(child);
    population.push_back(Member{std::move(child), val, births++});
    if (static_cast<int>(population.size()) > cfg.population_size) {
      if (trace) {
        int oldest = population.front().birth;
        for (const auto& m : population) oldest = std::min(oldest, m.birth);
        trace->oldest_birth.push_back(oldest);
        trace->removed_birth.push_back(population.front().birth);
      }
      population.pop_front();
    }
    if (trace) trace->population_size.push_back(population.size());
  }
  return session.finish("evolution");
}

// ---------------------------------------------------------------------------
// Neural predictor

void PredictorSearchConfig::validate() const {
  if (n_train < 3) throw std::invalid_argument("predictor: N must be >= 3");
  if (k_validate < 1) throw std::invalid_argument("predictor: K must be >= 1");
  if (pool_size < k_validate) throw std::invalid_argument("predictor: pool size M must be >= K");
  if (grid.empty()) throw std::invalid_argument("predictor: empty config grid");
  for (const auto& g : grid) g.validate();
  if (two_stage) classifier.validate();
}

Trajectory neural_predictor_search(const BenchmarkOracle& oracle, const PredictorSearchConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  SearchSession session(oracle, Budget::models(cfg.n_train + cfg.k_validate), seed);
  Rng rng(derive_seed(seed, 0x70726564));
  const auto& vocab = oracle.space().vocab();

  bool exhausted = false;
  std::vector<LabeledSample> data;
  for (auto& a : sample_distinct(oracle, rng, static_cast<std::size_t>(cfg.n_train), {}, {}, &exhausted)) {
    const double v = session.train(a);
    data.push_back(LabeledSample{std::move(a), v});
  }
  if (data.size() < 3) return session.finish("predictor", true);

  const std::uint64_t fit_seed = derive_seed(seed, 0x666974);
  std::function<double(const ArchGraph&)> score;
  if (cfg.two_stage) {
    GcnConfig reg = cfg.grid.front();
    if (cfg.grid.size() > 1) reg = cross_validate(vocab, data, cfg.grid, cfg.cv, derive_seed(fit_seed, 1)).best;
    if (cfg.growth > 1.0) reg = grow_for_full_data(reg, vocab.size(), cfg.growth);
    auto two = std::make_shared<TwoStagePredictor>(
        train_two_stage(cfg.classifier, reg, vocab, data, cfg.threshold, derive_seed(fit_seed, 2)));
    score = [two](const ArchGraph& a) { return two->ranking_score(a); };
  } else {
    auto model = std::make_shared<GcnModel>(select_and_train(vocab, data, cfg.grid, cfg.cv, cfg.growth, fit_seed));
    score = [model](const ArchGraph& a) { return model->predict_accuracy(a); };
  }

  auto pool = sample_distinct(oracle, rng, static_cast<std::size_t>(cfg.pool_size), session.trained_keys());
  if (pool.size() < static_cast<std::size_t>(cfg.k_validate)) {
    throw std::invalid_argument("predictor: pool of " + std::to_string(pool.size()) + " unseen models is smaller than K=" +
                                std::to_string(cfg.k_validate));
  }
  struct Ranked {
    double score;
    ArchKey key;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) ranked.push_back({score(pool[i]), canonical_hash(pool[i]), i});
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  for (std::size_t i = 0; i < ranked.size() && session.can_train(); ++i) session.train(pool[ranked[i].index]);
  return session.finish("predictor", exhausted);
}

// ---------------------------------------------------------------------------
// Latency-constrained

void LatencySearchConfig::validate() const {
  if (!(lo_ms <= hi_ms)) throw std::invalid_argument("latency search: window must have lo <= hi");
  if (n_train < 3) throw std::invalid_argument("latency search: N must be >= 3");
  if (pool_size < 1) throw std::invalid_argument("latency search: pool size must be >= 1");
  if (j < 1) throw std::invalid_argument("latency search: J must be >= 1");
  predictor.validate();
}

LatencySearchResult latency_constrained_search(const BenchmarkOracle& oracle, const LatencySearchConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  if (!oracle.has_latency()) throw LatencyUnavailableError("latency search needs an oracle with a latency model");
  auto in_window = [&](const ArchGraph& a) {
    const double l = oracle.latency(a);
    return l >= cfg.lo_ms && l <= cfg.hi_ms;
  };
  Rng rng(derive_seed(seed, 0x6c6174));
  auto train_set = sample_distinct(oracle, rng, static_cast<std::size_t>(cfg.n_train), {}, in_window);
  if (train_set.empty()) throw std::runtime_error("latency window is empty under the latency model");

  SearchSession session(oracle, Budget::models(cfg.n_train + cfg.pool_size), seed);
  std::vector<LabeledSample> data;
  for (auto& a : train_set) {
    const double v = session.train(a);
    data.push_back(LabeledSample{std::move(a), v});
  }
  GcnConfig pcfg = cfg.predictor;
  pcfg.output_head = OutputHead::kRegression;
  const GcnModel model = train_gcn(pcfg, oracle.space().vocab(), data, derive_seed(seed, 0x666974)).model;

  LatencySearchResult result;
  std::unordered_map<ArchKey, ArchGraph, ArchKeyHash> by_key;
  for (auto& a : sample_distinct(oracle, rng, static_cast<std::size_t>(cfg.pool_size), session.trained_keys(), in_window)) {
    const ArchKey k = canonical_hash(a);
    result.candidates.push_back(ParetoPoint{oracle.latency(a), model.predict_accuracy(a), k});
    by_key.emplace(k, std::move(a));
  }
  result.finalists = soft_pareto_filter(result.candidates, cfg.j, cfg.window);
  std::vector<ParetoPoint> measured;
  for (const auto& f : result.finalists) {
    const ArchGraph& a = by_key.at(f.key);
    session.train(a);
    measured.push_back(ParetoPoint{f.latency_ms, oracle.final_report(a), f.key});
  }
  result.frontier = pareto_frontier(std::move(measured));
  result.trajectory = session.finish("latency");
  return result;
}

}  // namespace npnas
