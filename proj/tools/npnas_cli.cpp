// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors
//
// npnas: command-line front end.
//
//   npnas search --config exp.cfg [--set key=value ...]
//   npnas report --in random.jsonl [--axis models|seconds]
//   npnas compare --a predictor.jsonl --b evolution.jsonl [--target 95.2]
//   npnas train-predictor --space synthetic --synthetic --n 172 --out model.npck
//   npnas predict --model model.npck --arch "ops=0,1,2,3,1;adj=..."
//   npnas gen-synthetic-table --space synthetic --out table.tsv
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "npnas/benchmark_oracle.hpp"
#include "npnas/checkpoint.hpp"
#include "npnas/experiment.hpp"
#include "npnas/gcn_predictor.hpp"
#include "npnas/metrics.hpp"
#include "npnas/search_strategies.hpp"
#include "npnas/text.hpp"

namespace {

using namespace npnas;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Trajectory> load_runs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read '" + path + "'");
  auto runs = read_trajectories_jsonl(in);
  if (runs.empty()) throw ConfigError("", "'" + path + "' holds no trajectories");
  return runs;
}

ArchGraph parse_any_arch(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '(') return parse_linear_tuple(text);
  return parse_arch_text(text);
}

struct OracleOptions {
  std::string space = "synthetic";
  std::string oracle_file;
  bool synthetic = false;
  double noise_sd = 0.3;
  std::uint64_t synthetic_seed = 1;
  double bad_fraction = 0.1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--space", space, "cell, linear or synthetic")->capture_default_str();
    cmd->add_option("--oracle-file", oracle_file, "tabular benchmark");
    cmd->add_flag("--synthetic", synthetic, "use the synthetic benchmark");
    cmd->add_option("--noise-sd", noise_sd, "synthetic per-run noise")->capture_default_str();
    cmd->add_option("--synthetic-seed", synthetic_seed, "synthetic landscape seed")->capture_default_str();
    cmd->add_option("--bad-fraction", bad_fraction, "synthetic unstable share")->capture_default_str();
  }

  std::unique_ptr<BenchmarkOracle> make() const {
    const SearchSpace s = SearchSpace::from_name(space);
    if (oracle_file.empty() == !synthetic) throw ConfigError("", "pass exactly one of --oracle-file and --synthetic");
    if (!oracle_file.empty()) return std::make_unique<TabularOracle>(TabularOracle::load_file(oracle_file, s));
    SyntheticSpec spec;
    spec.space = s.kind();
    spec.noise_sd = noise_sd;
    spec.seed = synthetic_seed;
    spec.bad_fraction = bad_fraction;
    return make_synthetic_oracle(spec);
  }
};

int cmd_search(const std::string& config_path, const std::vector<std::string>& sets,
               const std::vector<std::pair<std::string, std::string>>& flags) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (!config_path.empty()) entries = parse_config_entries(read_file(config_path));
  for (const auto& f : flags) entries.push_back(f);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("", "--set expects key=value, got '" + s + "'");
    entries.emplace_back(std::string(trim(std::string_view(s).substr(0, eq))),
                         std::string(trim(std::string_view(s).substr(eq + 1))));
  }
  ExperimentConfig cfg = parse_experiment_config(entries);
  apply_environment(cfg);

  std::signal(SIGINT, on_sigint);
  const ExperimentResult res = run_experiment(cfg, &g_interrupted);
  std::vector<double> tests;
  for (const auto& t : res.runs) tests.push_back(t.final.test_acc);
  std::cout << strategy_name(cfg.strategy) << ": replicas=" << res.runs.size()
            << " mean_test=" << format_double(mean_of(tests)) << " sd_test=" << format_double(sample_sd(tests))
            << " wall_s=" << format_double(res.wall_seconds) << '\n'
            << "  " << res.jsonl_path << '\n'
            << "  " << res.csv_path << '\n'
            << "  " << res.summary_path << '\n';
  if (res.interrupted) {
    std::cerr << "interrupted after " << res.runs.size() << " of " << cfg.replicas << " replicas\n";
    return kExitRuntime;
  }
  return kExitOk;
}

BudgetAxis parse_axis(const std::string& axis) {
  if (axis == "models") return BudgetAxis::kModels;
  if (axis == "seconds") return BudgetAxis::kSeconds;
  throw ConfigError("axis", "expected models or seconds");
}

int cmd_report(const std::string& in_path, const std::string& axis, int points, const std::string& out_path) {
  const auto runs = load_runs(in_path);
  const BudgetAxis ax = parse_axis(axis);
  const auto grid = default_budget_grid(runs, ax, points);
  const auto agg = aggregate_any(runs, grid, ax);
  if (out_path.empty()) {
    write_aggregate_csv(std::cout, agg);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_aggregate_csv(out, agg);
  }
  return kExitOk;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, std::vector<double> targets,
                const std::string& axis, int points) {
  const auto a = load_runs(a_path);
  const auto b = load_runs(b_path);
  const BudgetAxis ax = parse_axis(axis);
  std::vector<Trajectory> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto grid = default_budget_grid(all, ax, points);
  const auto agg_a = aggregate_any(a, grid, ax);
  const auto agg_b = aggregate_any(b, grid, ax);
  if (targets.empty()) targets.push_back(std::min(agg_a.mean_test.back(), agg_b.mean_test.back()));
  std::cout << "target,budget_a,budget_b,speedup\n";
  for (double t : targets) {
    const auto ba = budget_to_reach(agg_a.budget, agg_a.mean_test, t);
    const auto bb = budget_to_reach(agg_b.budget, agg_b.mean_test, t);
    const auto s = speedup_ratio(agg_a, agg_b, t);
    std::cout << format_double(t) << ',' << (ba ? format_double(*ba) : "unreached") << ','
              << (bb ? format_double(*bb) : "unreached") << ',' << (s ? format_double(*s) : "unreached") << '\n';
  }
  return kExitOk;
}

int cmd_train_predictor(const OracleOptions& oo, int n, std::uint64_t seed, const std::string& overrides,
                        bool two_stage, std::optional<double> threshold, const std::string& out_path) {
  if (out_path.empty()) throw ConfigError("out", "an output path is required");
  if (n < 3) throw ConfigError("n", "must be >= 3");
  const auto oracle = oo.make();
  const SearchSpace& space = oracle->space();
  const GcnConfig base =
      space.kind() == SpaceKind::kLinear ? GcnConfig::proxyless_regressor() : GcnConfig::nasbench_regressor();
  GcnConfig cfg;
  try {
    cfg = parse_gcn_config(overrides, base);
  } catch (const std::exception& e) {
    throw ConfigError("predictor", e.what());
  }
  Rng rng(derive_seed(seed, 0x73616d70));
  ReplicaOracle replica(*oracle, seed);
  std::vector<LabeledSample> data;
  for (auto& a : sample_distinct(*oracle, rng, static_cast<std::size_t>(n))) {
    const double v = replica.search_signal(a).val_acc;
    data.push_back(LabeledSample{std::move(a), v});
  }
  if (two_stage) {
    if (!threshold) {
      const auto* syn = dynamic_cast<const SyntheticOracle*>(oracle.get());
      threshold = syn ? syn->accuracy_quantile(0.1) : 91.0;
    }
    const auto two = train_two_stage(GcnConfig::nasbench_classifier(), cfg, space.vocab(), data, *threshold, seed);
    save_checkpoint(out_path, two.regressor().to_checkpoint());
    save_checkpoint(out_path + ".cls", two.classifier().to_checkpoint());
    std::cout << "trained two-stage predictor on " << data.size() << " samples\n  " << out_path << "\n  "
              << out_path << ".cls\n";
  } else {
    const auto res = train_gcn(cfg, space.vocab(), data, seed);
    save_checkpoint(out_path, res.model.to_checkpoint());
    std::cout << "trained on " << data.size() << " samples, final loss " << format_double(res.epoch_loss.back())
              << "\n  " << out_path << '\n';
  }
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& classifier_path, std::vector<std::string> archs,
                const std::string& archs_file) {
  const GcnModel model = GcnModel::from_checkpoint(load_checkpoint(model_path));
  std::optional<GcnModel> classifier;
  if (!classifier_path.empty()) classifier = GcnModel::from_checkpoint(load_checkpoint(classifier_path));
  if (!archs_file.empty()) {
    std::istringstream in(read_file(archs_file));
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) archs.push_back(line);
  }
  if (archs.empty()) throw ConfigError("arch", "no architectures given");
  for (const auto& text : archs) {
    const ArchGraph a = parse_any_arch(text);
    std::cout << trim(text) << '\t';
    if (classifier && classifier->classify_quality(a) < 0.5) {
      std::cout << "REJECTED\n";
    } else {
      std::cout << format_double(model.predict_accuracy(a)) << '\n';
    }
  }
  return kExitOk;
}

int cmd_gen_table(const OracleOptions& oo, bool no_latency, std::size_t count, const std::string& out_path) {
  SyntheticSpec spec;
  spec.space = SearchSpace::from_name(oo.space).kind();
  spec.noise_sd = oo.noise_sd;
  spec.seed = oo.synthetic_seed;
  spec.bad_fraction = oo.bad_fraction;
  spec.latency = !no_latency;
  const SyntheticOracle oracle(spec);
  if (out_path.empty()) {
    oracle.dump_table(std::cout, count);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    oracle.dump_table(out, count);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-predictor architecture search on tabular and synthetic benchmarks"};
  app.require_subcommand(1);

  auto* search = app.add_subcommand("search", "run a search experiment");
  std::string config_path;
  std::vector<std::string> sets;
  std::string strategy, space, oracle_file, out;
  bool synthetic = false;
  std::optional<int> budget, replicas, threads;
  std::optional<std::uint64_t> seed;
  search->add_option("--config", config_path, "key = value experiment file");
  search->add_option("--set", sets, "extra key=value (repeatable)");
  search->add_option("--strategy", strategy, "random, evolution, predictor or oracle");
  search->add_option("--space", space, "cell, linear or synthetic");
  search->add_option("--oracle-file", oracle_file, "tabular benchmark");
  search->add_flag("--synthetic", synthetic, "use the synthetic benchmark");
  search->add_option("--budget", budget, "models per replica");
  search->add_option("--replicas", replicas, "replica count");
  search->add_option("--seed", seed, "base seed");
  search->add_option("--threads", threads, "worker threads");
  search->add_option("--out", out, "JSON-lines output path");
  search->footer("Config keys:\n" + experiment_config_reference());

  auto* report = app.add_subcommand("report", "aggregate CSV from a JSON-lines file");
  std::string report_in, report_out, report_axis = "models";
  int report_points = 50;
  report->add_option("--in", report_in, "JSON-lines trajectories")->required();
  report->add_option("--out", report_out, "CSV path (default stdout)");
  report->add_option("--axis", report_axis, "models or seconds")->capture_default_str();
  report->add_option("--points", report_points, "grid points on the seconds axis")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "speedup of b over a to reach target accuracies");
  std::string cmp_a, cmp_b, cmp_axis = "models";
  std::vector<double> targets;
  int cmp_points = 200;
  compare->add_option("--a", cmp_a, "JSON-lines of the faster strategy")->required();
  compare->add_option("--b", cmp_b, "JSON-lines of the baseline")->required();
  compare->add_option("--target", targets, "mean test accuracy targets (repeatable)");
  compare->add_option("--axis", cmp_axis, "models or seconds")->capture_default_str();
  compare->add_option("--points", cmp_points, "grid points on the seconds axis")->capture_default_str();

  auto* train = app.add_subcommand("train-predictor", "train a GCN predictor on N sampled models");
  OracleOptions train_oracle;
  train_oracle.add_to(train);
  int train_n = 172;
  std::uint64_t train_seed = 0;
  std::string train_overrides, train_out;
  bool train_two = false;
  std::optional<double> train_threshold;
  train->add_option("--n", train_n, "training samples")->capture_default_str();
  train->add_option("--seed", train_seed, "seed")->capture_default_str();
  train->add_option("--predictor", train_overrides, "overrides, e.g. \"node_dim=64 epochs=100\"");
  train->add_flag("--two-stage", train_two, "also train a classifier");
  train->add_option("--threshold", train_threshold, "classifier threshold (default 91; synthetic: 10th percentile)");
  train->add_option("--out", train_out, "checkpoint path")->required();

  auto* predict = app.add_subcommand("predict", "predict accuracies with a trained checkpoint");
  std::string pred_model, pred_cls, pred_file;
  std::vector<std::string> pred_archs;
  predict->add_option("--model", pred_model, "regressor checkpoint")->required();
  predict->add_option("--classifier", pred_cls, "classifier checkpoint");
  predict->add_option("--arch", pred_archs, "ops=..;adj=.. or a linear tuple (repeatable)");
  predict->add_option("--archs", pred_file, "file with one architecture per line");

  auto* gen = app.add_subcommand("gen-synthetic-table", "write a synthetic benchmark as a table");
  OracleOptions gen_oracle;
  gen_oracle.add_to(gen);
  bool gen_no_latency = false;
  std::size_t gen_count = 0;
  std::string gen_out;
  gen->add_flag("--no-latency", gen_no_latency, "omit the latency column");
  gen->add_option("--count", gen_count, "sampled records for non-enumerable spaces");
  gen->add_option("--out", gen_out, "table path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*search) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (!strategy.empty()) flags.emplace_back("strategy", strategy);
      if (!space.empty()) flags.emplace_back("space", space);
      if (!oracle_file.empty()) flags.emplace_back("oracle_file", oracle_file);
      if (synthetic) flags.emplace_back("synthetic", "true");
      if (budget) flags.emplace_back("budget", std::to_string(*budget));
      if (replicas) flags.emplace_back("replicas", std::to_string(*replicas));
      if (seed) flags.emplace_back("seed", std::to_string(*seed));
      if (threads) flags.emplace_back("threads", std::to_string(*threads));
      if (!out.empty()) flags.emplace_back("jsonl", out);
      return cmd_search(config_path, sets, flags);
    }
    if (*report) return cmd_report(report_in, report_axis, report_points, report_out);
    if (*compare) return cmd_compare(cmp_a, cmp_b, targets, cmp_axis, cmp_points);
    if (*train) {
      return cmd_train_predictor(train_oracle, train_n, train_seed, train_overrides, train_two, train_threshold,
                                 train_out);
    }
    if (*predict) return cmd_predict(pred_model, pred_cls, pred_archs, pred_file);
    if (*gen) return cmd_gen_table(gen_oracle, gen_no_latency, gen_count, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
