// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "json.hpp"
#include "npnas/text.hpp"

namespace npnas {

namespace {

using json = nlohmann::ordered_json;

std::string space_name(SpaceKind k) {
  switch (k) {
    case SpaceKind::kCell:
      return "cell";
    case SpaceKind::kLinear:
      return "linear";
    case SpaceKind::kSynthetic:
      return "synthetic";
  }
  return "?";
}

/// Accepts plain reals and fractions such as "1/14".
double parse_real_or_fraction(std::string_view v, std::string_view what) {
  const auto slash = v.find('/');
  if (slash == std::string_view::npos) return parse_double(v, what);
  const double den = parse_double(v.substr(slash + 1), what);
  if (den == 0.0) throw ParseError("bad " + std::string(what) + " '" + std::string(v) + "'");
  return parse_double(v.substr(0, slash), what) / den;
}

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "random";
    case Strategy::kEvolution:
      return "evolution";
    case Strategy::kPredictor:
      return "predictor";
    case Strategy::kOracle:
      return "oracle";
  }
  return "?";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "random") return Strategy::kRandom;
  if (name == "evolution") return Strategy::kEvolution;
  if (name == "predictor") return Strategy::kPredictor;
  if (name == "oracle") return Strategy::kOracle;
  throw ConfigError("strategy", "expected random, evolution, predictor or oracle, got '" + std::string(name) + "'");
}

std::string ExperimentConfig::output_stem() const {
  const std::string n = name.empty() ? strategy_name(strategy) : name;
  return (std::filesystem::path(out_dir) / n).string();
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_experiment_config(std::string_view text) {
  return parse_experiment_config(parse_config_entries(text));
}

std::vector<std::pair<std::string, std::string>> parse_config_entries(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto hash = raw.find('#');
    const auto line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return entries;
}

ExperimentConfig parse_experiment_config(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : entries) kv[k] = v;  // later entries win

  static const std::set<std::string> kKnown = {
      "strategy",   "space",        "oracle_file", "synthetic",       "noise_sd",  "synthetic_seed",
      "bad_fraction", "latency",    "budget",      "budget_seconds",  "replicas",  "seed",
      "threads",    "population_size", "sample_size", "p_edge",       "p_node",    "n_train",
      "k_validate", "pool_size",    "two_stage",   "threshold",       "growth",    "cv_holdout",
      "cv_repeats", "predictor",    "predictor_grid", "classifier",   "out_dir",   "name",
      "jsonl"};
  for (const auto& [k, v] : kv)
    if (!kKnown.contains(k)) throw ConfigError(k, "unknown key '" + k + "'");

  const bool synthetic_flag = kv.contains("synthetic") && parse_bool(kv["synthetic"], "synthetic");
  std::vector<std::string> missing;
  if (!kv.contains("strategy")) missing.push_back("strategy");
  if (!kv.contains("space")) missing.push_back("space");
  const bool is_oracle = kv.contains("strategy") && kv["strategy"] == "oracle";
  if (!is_oracle && !kv.contains("budget") && !kv.contains("budget_seconds")) missing.push_back("budget");
  if (!kv.contains("oracle_file") && !synthetic_flag) missing.push_back("oracle_file|synthetic");
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("", "missing required fields: " + list);
  }

  ExperimentConfig cfg;
  auto field = [&](const std::string& key, auto&& fn) {
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      fn(it->second);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  auto as_int = [](const std::string& v, const char* what) { return static_cast<int>(parse_integer(v, what)); };

  field("strategy", [&](const std::string& v) { cfg.strategy = strategy_from_name(v); });
  field("space", [&](const std::string& v) { cfg.space = SearchSpace::from_name(v).kind(); });
  cfg.synthetic.space = cfg.space;

  if (kv.contains("oracle_file") && synthetic_flag) {
    throw ConfigError("oracle_file", "set either oracle_file or synthetic, not both");
  }
  field("oracle_file", [&](const std::string& v) {
    if (!std::filesystem::exists(v)) throw ConfigError("oracle_file", "file '" + v + "' does not exist");
    cfg.oracle_file = v;
  });
  field("noise_sd", [&](const std::string& v) { cfg.synthetic.noise_sd = parse_double(v, "noise_sd"); });
  field("synthetic_seed", [&](const std::string& v) {
    cfg.synthetic.seed = static_cast<std::uint64_t>(parse_integer(v, "synthetic_seed"));
  });
  field("bad_fraction", [&](const std::string& v) { cfg.synthetic.bad_fraction = parse_double(v, "bad_fraction"); });
  field("latency", [&](const std::string& v) { cfg.synthetic.latency = parse_bool(v, "latency"); });
  if (!(cfg.synthetic.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be >= 0");
  if (!(cfg.synthetic.bad_fraction >= 0.0 && cfg.synthetic.bad_fraction < 1.0)) {
    throw ConfigError("bad_fraction", "must be in [0, 1)");
  }

  if (kv.contains("budget") && kv.contains("budget_seconds")) {
    throw ConfigError("budget", "set either budget or budget_seconds, not both");
  }
  field("budget", [&](const std::string& v) { cfg.budget = Budget::models(as_int(v, "budget")); });
  field("budget_seconds", [&](const std::string& v) { cfg.budget = Budget::seconds(parse_double(v, "budget_seconds")); });
  try {
    cfg.budget.validate();
  } catch (const std::exception& e) {
    throw ConfigError("budget", e.what());
  }

  field("replicas", [&](const std::string& v) { cfg.replicas = as_int(v, "replicas"); });
  if (cfg.replicas < 1) throw ConfigError("replicas", "must be >= 1");
  field("seed", [&](const std::string& v) { cfg.seed = static_cast<std::uint64_t>(parse_integer(v, "seed")); });
  cfg.threads = default_threads();
  field("threads", [&](const std::string& v) { cfg.threads = as_int(v, "threads"); });
  if (cfg.threads < 1) throw ConfigError("threads", "must be >= 1");

  field("population_size", [&](const std::string& v) { cfg.evolution.population_size = as_int(v, "population_size"); });
  field("sample_size", [&](const std::string& v) { cfg.evolution.sample_size = as_int(v, "sample_size"); });
  field("p_edge", [&](const std::string& v) { cfg.evolution.p_edge = parse_real_or_fraction(v, "p_edge"); });
  field("p_node", [&](const std::string& v) { cfg.evolution.p_node = parse_real_or_fraction(v, "p_node"); });
  try {
    cfg.evolution.validate();
  } catch (const std::exception& e) {
    throw ConfigError("population_size", e.what());
  }

  auto& p = cfg.predictor;
  const GcnConfig base = cfg.space == SpaceKind::kLinear ? GcnConfig::proxyless_regressor() : GcnConfig::nasbench_regressor();
  p.grid = {base};
  p.two_stage = cfg.space == SpaceKind::kCell;
  field("predictor", [&](const std::string& v) { p.grid = {parse_gcn_config(v, base)}; });
  field("predictor_grid", [&](const std::string& v) {
    const GcnConfig root = p.grid.front();
    p.grid.clear();
    for (auto part : split(v, '|')) p.grid.push_back(parse_gcn_config(part, root));
  });
  field("classifier", [&](const std::string& v) { p.classifier = parse_gcn_config(v, GcnConfig::nasbench_classifier()); });
  field("n_train", [&](const std::string& v) { p.n_train = as_int(v, "n_train"); });
  field("pool_size", [&](const std::string& v) { p.pool_size = as_int(v, "pool_size"); });
  field("two_stage", [&](const std::string& v) { p.two_stage = parse_bool(v, "two_stage"); });
  field("threshold", [&](const std::string& v) {
    p.threshold = parse_double(v, "threshold");
    cfg.threshold_set = true;
  });
  field("growth", [&](const std::string& v) { p.growth = parse_double(v, "growth"); });
  field("cv_holdout", [&](const std::string& v) { p.cv.holdout_fraction = parse_double(v, "cv_holdout"); });
  field("cv_repeats", [&](const std::string& v) { p.cv.repeats = as_int(v, "cv_repeats"); });
  if (cfg.strategy == Strategy::kPredictor) {
    if (!cfg.budget.max_models) throw ConfigError("budget", "predictor search needs a model-count budget");
    p.k_validate = *cfg.budget.max_models - p.n_train;
    field("k_validate", [&](const std::string& v) { p.k_validate = as_int(v, "k_validate"); });
    if (p.n_train + p.k_validate != *cfg.budget.max_models) {
      throw ConfigError("k_validate", "n_train + k_validate must equal budget");
    }
    try {
      p.validate();
    } catch (const std::exception& e) {
      throw ConfigError(p.k_validate < 1 ? "n_train" : "predictor", e.what());
    }
  } else {
    field("k_validate", [&](const std::string& v) { p.k_validate = as_int(v, "k_validate"); });
  }

  field("out_dir", [&](const std::string& v) { cfg.out_dir = v; });
  field("name", [&](const std::string& v) { cfg.name = v; });
  field("jsonl", [&](const std::string& v) { cfg.jsonl_path = v; });

  std::set<std::uint64_t> seeds;
  for (int r = 0; r < cfg.replicas; ++r)
    if (!seeds.insert(cfg.replica_seed(r)).second) throw ConfigError("seed", "replica seeds collide");
  return cfg;
}

std::string experiment_config_reference() {
  return "strategy        random | evolution | predictor | oracle   (required)\n"
         "space           cell | linear | synthetic                 (required)\n"
         "oracle_file     tabular benchmark path        (required unless synthetic = true)\n"
         "synthetic       true to use the synthetic benchmark\n"
         "noise_sd        0.3       per-run accuracy noise (synthetic)\n"
         "synthetic_seed  1         landscape seed (synthetic)\n"
         "bad_fraction    0.1       share of unstable architectures (synthetic)\n"
         "latency         true      attach the latency model (synthetic)\n"
         "budget          -         trained models per replica    (required, or budget_seconds)\n"
         "budget_seconds  -         simulated training seconds per replica\n"
         "replicas        1\n"
         "seed            0         replica r uses derive_seed(seed, r)\n"
         "threads         cores     worker threads; results do not depend on it\n"
         "population_size 100\n"
         "sample_size     10\n"
         "p_edge          1/14\n"
         "p_node          1/10\n"
         "n_train         172       N\n"
         "k_validate      budget-N  K\n"
         "pool_size       10000     M\n"
         "two_stage       true on cell, false elsewhere\n"
         "threshold       91        classifier threshold (percent); synthetic: 10th percentile\n"
         "growth          1         parameter growth before the final fit\n"
         "cv_holdout      0.3333    cross-validation holdout fraction\n"
         "cv_repeats      1\n"
         "predictor       overrides, e.g. \"layers=3 node_dim=144 fc=128 lr=1e-4\"\n"
         "predictor_grid  '|'-separated override sets, cross-validated\n"
         "classifier      overrides for the two-stage classifier\n"
         "out_dir         results\n"
         "name            strategy name   output file prefix\n"
         "jsonl           explicit JSON-lines output path\n";
}

void apply_environment(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("NPNAS_OUT_DIR"); dir && *dir) cfg.out_dir = dir;
  if (const char* t = std::getenv("NPNAS_THREADS"); t && *t) {
    try {
      cfg.threads = static_cast<int>(parse_integer(t, "NPNAS_THREADS"));
    } catch (const std::exception& e) {
      throw ConfigError("NPNAS_THREADS", e.what());
    }
    if (cfg.threads < 1) throw ConfigError("NPNAS_THREADS", "must be >= 1");
  }
}

std::unique_ptr<BenchmarkOracle> make_oracle(const ExperimentConfig& cfg) {
  const SearchSpace space = SearchSpace::from_name(space_name(cfg.space));
  if (!cfg.oracle_file.empty()) {
    return std::make_unique<TabularOracle>(TabularOracle::load_file(cfg.oracle_file, space));
  }
  SyntheticSpec spec = cfg.synthetic;
  spec.space = cfg.space;
  return make_synthetic_oracle(spec);
}

Trajectory run_replica(const ExperimentConfig& cfg, const BenchmarkOracle& oracle, int replica) {
  const std::uint64_t seed = cfg.replica_seed(replica);
  switch (cfg.strategy) {
    case Strategy::kRandom:
      return random_search(oracle, cfg.budget, seed);
    case Strategy::kEvolution:
      return regularized_evolution(oracle, cfg.budget, cfg.evolution, seed);
    case Strategy::kPredictor: {
      PredictorSearchConfig p = cfg.predictor;
      if (!cfg.threshold_set)
        if (const auto* syn = dynamic_cast<const SyntheticOracle*>(&oracle)) p.threshold = syn->accuracy_quantile(0.1);
      return neural_predictor_search(oracle, p, seed);
    }
    case Strategy::kOracle:
      return oracle_search(oracle, seed);
  }
  throw std::logic_error("unknown strategy");
}

// ---------------------------------------------------------------------------
// Output

void write_trajectory_jsonl(std::ostream& out, const Trajectory& t, int replica) {
  for (const auto& e : t.events) {
    json j;
    j["type"] = "event";
    j["replica"] = replica;
    j["model"] = e.model_index;
    j["seconds"] = e.cumulative_seconds;
    j["arch"] = e.key.hex();
    j["val"] = e.val_acc;
    j["selected_val"] = e.selected_val;
    j["selected_test"] = e.selected_test;
    out << j.dump() << '\n';
  }
  json f;
  f["type"] = "final";
  f["replica"] = replica;
  f["strategy"] = t.strategy;
  f["arch"] = t.final.key.hex();
  f["graph"] = format_arch_text(t.final.arch);
  f["val"] = t.final.val_acc;
  f["test"] = t.final.test_acc;
  f["models"] = t.events.size();
  f["total_seconds"] = t.total_seconds;
  f["exhausted"] = t.exhausted;
  out << f.dump() << '\n';
}

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in) {
  std::map<int, Trajectory> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const int r = j.at("replica").get<int>();
      Trajectory& t = runs[r];
      if (j.at("type") == "event") {
        TrajectoryEvent e;
        e.model_index = j.at("model").get<int>();
        e.cumulative_seconds = j.at("seconds").get<double>();
        e.key = ArchKey::from_hex(j.at("arch").get<std::string>());
        e.val_acc = j.at("val").get<double>();
        e.selected_val = j.at("selected_val").get<double>();
        e.selected_test = j.at("selected_test").get<double>();
        t.events.push_back(e);
      } else if (j.at("type") == "final") {
        t.strategy = j.at("strategy").get<std::string>();
        t.final.key = ArchKey::from_hex(j.at("arch").get<std::string>());
        t.final.arch = parse_arch_text(j.at("graph").get<std::string>());
        t.final.val_acc = j.at("val").get<double>();
        t.final.test_acc = j.at("test").get<double>();
        t.total_seconds = j.at("total_seconds").get<double>();
        t.exhausted = j.at("exhausted").get<bool>();
      } else {
        throw ParseError("unknown record type");
      }
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<Trajectory> out;
  for (auto& [r, t] : runs) out.push_back(std::move(t));
  return out;
}

std::vector<double> default_budget_grid(std::span<const Trajectory> runs, BudgetAxis axis, int points) {
  if (runs.empty()) throw MetricError("no trajectories");
  std::vector<double> grid;
  if (axis == BudgetAxis::kModels) {
    std::size_t shortest = runs.front().events.size();
    for (const auto& t : runs) shortest = std::min(shortest, t.events.size());
    for (std::size_t b = 1; b <= shortest; ++b) grid.push_back(static_cast<double>(b));
    return grid;
  }
  double start = 0.0, end = std::numeric_limits<double>::infinity();
  for (const auto& t : runs) {
    if (t.events.empty()) throw MetricError("empty trajectory");
    start = std::max(start, t.events.front().cumulative_seconds);
    end = std::min(end, t.total_seconds);
  }
  if (points < 2 || end <= start) return {start};
  for (int i = 0; i < points; ++i) grid.push_back(start + (end - start) * i / (points - 1));
  return grid;
}

RunAggregate aggregate_any(std::span<const Trajectory> runs, std::span<const double> grid, BudgetAxis axis) {
  if (runs.size() == 1) {
    const std::vector<Trajectory> twice{runs.front(), runs.front()};
    RunAggregate agg = aggregate_runs(twice, grid, axis);
    agg.replicas = 1;
    return agg;
  }
  return aggregate_runs(runs, grid, axis);
}

void write_aggregate_csv(std::ostream& out, const RunAggregate& agg) {
  out << "budget,mean_test,sd_test,mean_val,sd_val\n";
  for (std::size_t i = 0; i < agg.budget.size(); ++i) {
    out << format_double(agg.budget[i]) << ',' << format_double(agg.mean_test[i]) << ','
        << format_double(agg.sd_test[i]) << ',' << format_double(agg.mean_val[i]) << ','
        << format_double(agg.sd_val[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Runner

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::atomic<bool>* stop) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto oracle = make_oracle(cfg);

  ExperimentResult result;
  const std::string stem = cfg.output_stem();
  result.jsonl_path = cfg.jsonl_path.empty() ? stem + ".jsonl" : cfg.jsonl_path;
  result.csv_path = stem + ".csv";
  result.summary_path = stem + ".summary.json";
  for (const auto& path : {result.jsonl_path, result.csv_path}) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  std::ofstream jsonl(result.jsonl_path, std::ios::binary | std::ios::trunc);
  if (!jsonl) throw std::runtime_error("cannot write '" + result.jsonl_path + "'");

  const int n = cfg.replicas;
  std::vector<std::optional<Trajectory>> done(static_cast<std::size_t>(n));
  std::exception_ptr failure;
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<int> next{0};
  int finished_workers = 0;

  auto stopped = [&] { return stop && stop->load(); };
  auto worker = [&] {
    while (true) {
      {
        std::lock_guard lock(mu);
        if (failure) break;
      }
      if (stopped()) break;
      const int r = next.fetch_add(1);
      if (r >= n) break;
      try {
        Trajectory t = run_replica(cfg, *oracle, r);
        std::lock_guard lock(mu);
        done[static_cast<std::size_t>(r)] = std::move(t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
      cv.notify_all();
    }
    std::lock_guard lock(mu);
    ++finished_workers;
    cv.notify_all();
  };

  const int workers = std::max(1, std::min(cfg.threads, n));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);

  int written = 0;
  {
    std::unique_lock lock(mu);
    while (true) {
      cv.wait(lock, [&] {
        return finished_workers == workers || (written < n && done[static_cast<std::size_t>(written)].has_value());
      });
      while (written < n && done[static_cast<std::size_t>(written)]) {
        write_trajectory_jsonl(jsonl, *done[static_cast<std::size_t>(written)], written);
        jsonl.flush();
        result.runs.push_back(std::move(*done[static_cast<std::size_t>(written)]));
        ++written;
      }
      if (finished_workers == workers) break;
    }
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  result.interrupted = written < n;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!result.runs.empty()) {
    const auto grid = default_budget_grid(result.runs, BudgetAxis::kModels);
    std::ofstream csv(result.csv_path, std::ios::binary | std::ios::trunc);
    if (!grid.empty()) write_aggregate_csv(csv, aggregate_any(result.runs, grid, BudgetAxis::kModels));
  }

  json summary;
  summary["strategy"] = strategy_name(cfg.strategy);
  summary["space"] = space_name(cfg.space);
  summary["oracle"] = cfg.oracle_file.empty() ? std::string("synthetic") : cfg.oracle_file;
  summary["replicas"] = result.runs.size();
  summary["interrupted"] = result.interrupted;
  summary["wall_seconds"] = result.wall_seconds;
  std::vector<double> tests;
  json reps = json::array();
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& t = result.runs[r];
    tests.push_back(t.final.test_acc);
    reps.push_back({{"replica", r},
                    {"arch", t.final.key.hex()},
                    {"graph", format_arch_text(t.final.arch)},
                    {"val", t.final.val_acc},
                    {"test", t.final.test_acc},
                    {"total_seconds", t.total_seconds}});
  }
  summary["mean_test"] = mean_of(tests);
  summary["sd_test"] = sample_sd(tests);
  summary["runs"] = std::move(reps);
  std::ofstream sj(result.summary_path, std::ios::binary | std::ios::trunc);
  sj << summary.dump(2) << '\n';
  return result;
}

}  // namespace npnas
