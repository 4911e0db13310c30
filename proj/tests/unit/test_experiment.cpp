// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "npnas/experiment.hpp"
#include "npnas/text.hpp"

using namespace npnas;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("npnas_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(""),
                       "missing required fields: strategy, space, budget, oracle_file|synthetic", ConfigError);
  try {
    parse_experiment_config("strategy=evolution\nspace=synthetic\nsynthetic=true\nbudget=10\npoplation_size=5\n");
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "poplation_size");
    CHECK(std::string(e.what()).find("poplation_size") != std::string::npos);
  }
  const std::string base = "strategy=random\nspace=synthetic\nsynthetic=true\n";
  CHECK_THROWS_AS(parse_experiment_config(base + "budget=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(base + "budget=10\nbudget_seconds=5\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(base + "budget=ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(base + "budget=10\nnoise_sd=-1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(base + "budget=10\noracle_file=/nonexistent\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("strategy=predictor\nspace=synthetic\nsynthetic=true\nbudget=150\n"
                                          "n_train=50\nk_validate=10\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("strategy=bogus\nspace=synthetic\nsynthetic=true\nbudget=5\n"),
                  ConfigError);
}

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_experiment_config(
      "# minimal\nstrategy = predictor\nspace = cell\nsynthetic = true\nbudget = 272  # N + K\n");
  CHECK(c.strategy == Strategy::kPredictor);
  CHECK(c.space == SpaceKind::kCell);
  CHECK(c.replicas == 1);
  CHECK(c.evolution.population_size == 100);
  CHECK(c.evolution.sample_size == 10);
  CHECK(c.evolution.p_edge == 1.0 / 14.0);
  CHECK(c.evolution.p_node == 1.0 / 10.0);
  CHECK(c.predictor.n_train == 172);
  CHECK(c.predictor.k_validate == 100);
  CHECK(c.predictor.two_stage);
  CHECK(c.predictor.threshold == 91.0);
  CHECK_FALSE(c.threshold_set);
  CHECK(c.predictor.grid.front() == GcnConfig::nasbench_regressor());
  CHECK(c.predictor.classifier == GcnConfig::nasbench_classifier());
  CHECK(c.synthetic.noise_sd == 0.3);

  const ExperimentConfig l =
      parse_experiment_config("strategy=random\nspace=linear\nsynthetic=true\nbudget=5\np_edge=1/7\n");
  CHECK(l.predictor.grid.front() == GcnConfig::proxyless_regressor());
  CHECK_FALSE(l.predictor.two_stage);
  CHECK(l.evolution.p_edge == 1.0 / 7.0);

  const ExperimentConfig p = parse_experiment_config(
      "strategy=predictor\nspace=synthetic\nsynthetic=true\nbudget=60\nn_train=20\n"
      "predictor_grid=layers=2|layers=3 node_dim=8\n");
  REQUIRE(p.predictor.grid.size() == 2);
  CHECK(p.predictor.grid[1].node_dim == 8);
  CHECK(p.predictor.k_validate == 40);
  CHECK_FALSE(experiment_config_reference().empty());
}

TEST_CASE("synthetic classifier threshold") {
  const std::string text =
      "strategy=predictor\nspace=synthetic\nsynthetic=true\nbudget=30\nn_train=10\ntwo_stage=true\n"
      "predictor=layers=1 node_dim=8 fc=8 epochs=5\nclassifier=layers=1 node_dim=8 fc=8 epochs=5\n";
  const ExperimentConfig implicit = parse_experiment_config(text);
  CHECK_FALSE(implicit.threshold_set);
  const ExperimentConfig given = parse_experiment_config(text + "threshold=95.5\n");
  CHECK(given.threshold_set);
  CHECK(given.predictor.threshold == 95.5);

  // the 10th percentile default matches an explicit threshold at that value
  const SyntheticOracle o(implicit.synthetic);
  const ExperimentConfig same =
      parse_experiment_config(text + "threshold=" + format_double(o.accuracy_quantile(0.1)) + "\n");
  const Trajectory a = run_replica(implicit, o, 0);
  const Trajectory b = run_replica(same, o, 0);
  const Trajectory c = run_replica(given, o, 0);
  CHECK(a.final.key == b.final.key);
  CHECK(a.events.size() == 30);
  CHECK(c.events.size() == 30);
}

TEST_CASE("environment overrides") {
  ExperimentConfig c = parse_experiment_config("strategy=random\nspace=synthetic\nsynthetic=true\nbudget=5\n");
  setenv("NPNAS_OUT_DIR", "/tmp/elsewhere", 1);
  setenv("NPNAS_THREADS", "3", 1);
  apply_environment(c);
  CHECK(c.out_dir == "/tmp/elsewhere");
  CHECK(c.threads == 3);
  setenv("NPNAS_THREADS", "zero", 1);
  CHECK_THROWS_AS(apply_environment(c), ConfigError);
  unsetenv("NPNAS_OUT_DIR");
  unsetenv("NPNAS_THREADS");
}

TEST_CASE("experiment outputs") {
  const fs::path dir = scratch("outputs");
  ExperimentConfig c = parse_experiment_config("strategy=random\nspace=synthetic\nsynthetic=true\nbudget=5\n");
  c.out_dir = dir.string();
  const ExperimentResult r = run_experiment(c);
  std::istringstream lines(slurp(r.jsonl_path));
  std::string line;
  int events = 0, finals = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    (j["type"] == "event" ? events : finals)++;
  }
  CHECK(events == 5);
  CHECK(finals == 1);
  CHECK(fs::exists(r.csv_path));
  const auto summary = nlohmann::json::parse(slurp(r.summary_path));
  CHECK(summary.contains("wall_seconds"));
  CHECK(slurp(r.csv_path).rfind("budget,mean_test,sd_test,mean_val,sd_val\n", 0) == 0);
}

TEST_CASE("experiments are deterministic across thread counts") {
  const fs::path dir = scratch("determinism");
  ExperimentConfig c = parse_experiment_config(
      "strategy=evolution\nspace=synthetic\nsynthetic=true\nbudget=120\nreplicas=6\nseed=4\n"
      "population_size=20\nsample_size=5\n");
  c.out_dir = dir.string();
  c.threads = 1;
  c.name = "a";
  const std::string a = slurp(run_experiment(c).jsonl_path);
  c.threads = 4;
  c.name = "b";
  const ExperimentResult rb = run_experiment(c);
  CHECK(a == slurp(rb.jsonl_path));
  CHECK(slurp(dir / "a.csv") == slurp(rb.csv_path));

  std::istringstream in(a);
  const auto runs = read_trajectories_jsonl(in);
  REQUIRE(runs.size() == 6);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].events.size() == 120);
    CHECK(runs[i].final.test_acc == rb.runs[i].final.test_acc);
    CHECK(runs[i].final.arch == rb.runs[i].final.arch);
  }
  std::ostringstream again;
  for (std::size_t i = 0; i < runs.size(); ++i) write_trajectory_jsonl(again, runs[i], static_cast<int>(i));
  CHECK(again.str() == a);
}

TEST_CASE("interrupted runs flush completed replicas") {
  const fs::path dir = scratch("stop");
  ExperimentConfig c =
      parse_experiment_config("strategy=random\nspace=synthetic\nsynthetic=true\nbudget=5\nreplicas=4\n");
  c.out_dir = dir.string();
  std::atomic<bool> stop{true};
  const ExperimentResult r = run_experiment(c, &stop);
  CHECK(r.interrupted);
  CHECK(r.runs.empty());
  CHECK(fs::exists(r.jsonl_path));
}

TEST_CASE("aggregation helpers") {
  Trajectory t;
  for (int i = 0; i < 3; ++i) {
    TrajectoryEvent e;
    e.model_index = i;
    e.cumulative_seconds = 100.0 * (i + 1);
    e.selected_test = 90 + i;
    t.events.push_back(e);
  }
  t.total_seconds = 300.0;
  const std::vector<Trajectory> one{t};
  const auto grid = default_budget_grid(one, BudgetAxis::kModels);
  CHECK(grid == std::vector<double>{1, 2, 3});
  const RunAggregate agg = aggregate_any(one, grid, BudgetAxis::kModels);
  CHECK(agg.sd_test == std::vector<double>{0, 0, 0});
  std::ostringstream csv;
  write_aggregate_csv(csv, agg);
  CHECK(csv.str() == "budget,mean_test,sd_test,mean_val,sd_val\n1,90,0,0,0\n2,91,0,0,0\n3,92,0,0,0\n");
  const auto secs = default_budget_grid(one, BudgetAxis::kSeconds, 3);
  CHECK(secs.size() == 3);
  CHECK(secs.back() == 300.0);
}
