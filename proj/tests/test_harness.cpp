#include <doctest.h>

#include <filesystem>

#include "sahanet/config.hpp"
#include "sahanet/harness.hpp"

using namespace sahanet;
using namespace sahanet::harness;

namespace {

// A small but complete experiment: short episode, two horizons, two seeds.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.scenario.n_minutes = 150;
  cfg.scenario.t_star = 70;
  cfg.seeds = {1, 2};
  cfg.t_adapt_sweep = {5, 10};
  cfg.grid.learning_rates = {0.05};
  cfg.grid.max_depths = {2};
  cfg.grid.min_samples_leaves = {4};
  cfg.grid.subsamples = {1.0};
  cfg.grid.tree_budget = 60;
  cfg.pso.swarm_size = 5;
  cfg.pso.iterations = 3;
  return cfg;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("metrics definitions") {
  const std::vector<double> a = {0.9, 0.8, 0.7};
  auto [mse0, mae0] = metrics(a, a);
  CHECK(mse0 == 0.0);
  CHECK(mae0 == 0.0);

  std::vector<double> shifted = a;
  for (double& v : shifted) v += 0.01;
  auto [mse1, mae1] = metrics(a, shifted);
  CHECK(mse1 == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(mae1 == doctest::Approx(1e-2).epsilon(1e-9));

  auto [mse2, mae2] = metrics({0.9}, {0.8});
  CHECK(mse2 == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(mae2 == doctest::Approx(0.1).epsilon(1e-9));

  CHECK_THROWS_AS(metrics({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(metrics({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = tiny_config();
  cfg.t_adapt_sweep = {100};  // 70 + 100 >= 150 - 30
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("experiment cardinality, protocol, and determinism") {
  const ExperimentConfig cfg = tiny_config();
  const ExperimentResult result = run_experiment(cfg);

  // 2 seeds x 2 horizons x 2 models
  CHECK(result.rows.size() == 8);
  CHECK(result.cells.size() == 4);
  CHECK(result.episodes.size() == 2);
  for (const MetricsRow& row : result.rows) {
    CHECK_FALSE(row.error);
    CHECK(row.test_begin == cfg.scenario.t_star + row.t_adapt + 1);
    CHECK(row.test_end == cfg.scenario.n_minutes - 1);
    // no leakage: every training minute precedes every test minute
    CHECK(cfg.scenario.t_star + row.t_adapt - 1 < row.test_begin);
    CHECK(row.mse >= 0.0);
    CHECK(row.mae >= 0.0);
  }
  for (const CellPrediction& cell : result.cells) {
    CHECK(cell.t.front() == cfg.scenario.t_star + cell.t_adapt + 1);
    CHECK(cell.t.back() == cfg.scenario.n_minutes - 1);
    for (double v : cell.y_mono) CHECK(!std::isnan(v));
    for (double v : cell.y_saha) CHECK(!std::isnan(v));
  }

  const ExperimentResult again = run_experiment(cfg);
  CHECK(metrics_to_csv(result.rows) == metrics_to_csv(again.rows));
}

TEST_CASE("failed cells become error rows and the run continues") {
  ExperimentConfig cfg = tiny_config();
  cfg.t_adapt_sweep = {1, 10};  // T=1 gives the network a 1-row window
  const ExperimentResult result = run_experiment(cfg);
  int saha_errors = 0, ok_rows = 0;
  for (const MetricsRow& row : result.rows) {
    if (row.error) {
      CHECK(row.model == "saha");
      CHECK(row.t_adapt == 1);
      ++saha_errors;
    } else {
      ++ok_rows;
    }
  }
  CHECK(saha_errors == 2);
  CHECK(ok_rows == 6);
  const std::string csv_text = metrics_to_csv(result.rows);
  CHECK(count_occurrences(csv_text, ",error\n") == 2);
}

TEST_CASE("emitted artifacts are complete and byte-stable") {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = tiny_config();
  const ExperimentResult result = run_experiment(cfg);
  const std::string dir1 = (fs::temp_directory_path() / "sahanet_out1").string();
  const std::string dir2 = (fs::temp_directory_path() / "sahanet_out2").string();
  const std::string echo = config::to_json(cfg).dump(2);
  emit_outputs(result, cfg, dir1, echo);
  emit_outputs(run_experiment(cfg), cfg, dir2, echo);

  for (const char* name :
       {"metrics.csv", "manifest.json", "figure1.svg",
        "predictions_seed1_tadapt5.csv", "predictions_seed1_tadapt10.csv",
        "predictions_seed2_tadapt5.csv", "predictions_seed2_tadapt10.csv",
        "structure_seed1_tadapt5.txt", "pso_history_seed1_tadapt5.csv",
        "observed_seed1.csv", "observed_seed2.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(fs::path(dir1) / name));
    CHECK(csv::read_file((fs::path(dir1) / name).string()) ==
          csv::read_file((fs::path(dir2) / name).string()));
  }

  // one panel per adaptation horizon
  const std::string svg = csv::read_file((fs::path(dir1) / "figure1.svg").string());
  CHECK(count_occurrences(svg, "<g class=\"panel\">") ==
        cfg.t_adapt_sweep.size());

  // prediction CSV layout: t,y_true,y_mono,y_saha
  const std::string pred = csv::read_file(
      (fs::path(dir1) / "predictions_seed1_tadapt5.csv").string());
  CHECK(pred.rfind("t,y_true,y_mono,y_saha\n", 0) == 0);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("json config round trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.fitness.lambda_mask = 1e-5;
  cfg.scenario.spo2_wean = 0.92;
  const auto j = config::to_json(cfg);
  const ExperimentConfig back = config::experiment_from_json(j);
  CHECK(back.scenario.n_minutes == cfg.scenario.n_minutes);
  CHECK(back.scenario.t_star == cfg.scenario.t_star);
  CHECK(back.scenario.spo2_wean == cfg.scenario.spo2_wean);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.t_adapt_sweep == cfg.t_adapt_sweep);
  CHECK(back.grid.tree_budget == cfg.grid.tree_budget);
  CHECK(back.pso.swarm_size == cfg.pso.swarm_size);
  CHECK(back.fitness.lambda_mask == cfg.fitness.lambda_mask);

  // an empty object is a complete configuration
  const ExperimentConfig defaults = config::experiment_from_json(config::json::object());
  CHECK(defaults.scenario.n_minutes == 720);
  CHECK(defaults.t_adapt_sweep == std::vector<int>{5, 10, 50, 100, 150, 200});
  CHECK(defaults.pso.swarm_size == 30);
  CHECK(defaults.pso.iterations == 30);
}

TEST_CASE("trace csv round trip") {
  twin::ScenarioConfig scfg;
  scfg.n_minutes = 60;
  scfg.t_star = 30;
  const twin::TwinTrace tr = twin::simulate(twin::generate_scenario(scfg, 7));
  const std::string text = csv::trace_to_csv(tr);
  const twin::TwinTrace back = csv::trace_from_csv(text);
  CHECK(back.n_minutes == tr.n_minutes);
  for (int i = 0; i < tr.n_minutes; ++i) {
    CHECK(back.fio2[i] == doctest::Approx(tr.fio2[i]).epsilon(1e-10));
    CHECK(back.spo2_obs[i] == doctest::Approx(tr.spo2_obs[i]).epsilon(1e-10));
    CHECK(back.shunt[i] == doctest::Approx(tr.shunt[i]).epsilon(1e-10));
  }
  CHECK_THROWS_AS(csv::trace_from_csv("bogus\n"), std::runtime_error);
}
