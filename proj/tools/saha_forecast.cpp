// saha-forecast: digital-twin episodes, forecasting baselines, and the
// adaptation-horizon experiment from the command line.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sahanet/config.hpp"
#include "sahanet/csv.hpp"
#include "sahanet/harness.hpp"

namespace fs = std::filesystem;
using namespace sahanet;

namespace {

harness::ExperimentConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return harness::ExperimentConfig{};
  return config::load_experiment_config(path);
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 const std::string& out_path) {
  const harness::ExperimentConfig cfg = load_config_or_default(config_path);
  const twin::Scenario scenario =
      twin::generate_scenario(cfg.scenario, seed, cfg.constants);
  const twin::TwinTrace trace = twin::simulate(scenario, cfg.constants);
  csv::write_file(out_path, csv::trace_to_csv(trace));
  std::cout << "wrote " << out_path << " (" << trace.n_minutes
            << " minutes, tau_g=" << csv::format_number(trace.tau_g) << ")\n";
  return 0;
}

int cmd_features(const std::string& config_path, std::uint64_t seed,
                 const std::string& trace_path, const std::string& out_path) {
  const harness::ExperimentConfig cfg = load_config_or_default(config_path);
  twin::TwinTrace trace;
  if (!trace_path.empty()) {
    trace = csv::trace_from_csv(csv::read_file(trace_path));
  } else {
    trace = twin::simulate(
        twin::generate_scenario(cfg.scenario, seed, cfg.constants),
        cfg.constants);
  }
  csv::write_file(out_path, csv::features_to_csv(trace, cfg.constants));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_train_monolith(const std::string& config_path,
                       const std::string& trace_path, int t_star, int t_adapt,
                       const std::string& ledger_path,
                       const std::string& pred_path) {
  const harness::ExperimentConfig cfg = load_config_or_default(config_path);
  twin::TwinTrace trace = csv::trace_from_csv(csv::read_file(trace_path));
  trace.t_star = t_star;

  const features::SupervisedWindow pre =
      features::build_window(trace, 1, t_star, cfg.constants);
  monolith::GridSearchConfig grid_cfg = cfg.grid;
  grid_cfg.threads = cfg.threads;
  const monolith::GridSearchResult gsr = monolith::grid_search(pre, grid_cfg);

  std::string ledger =
      "learning_rate,max_depth,min_samples_leaf,subsample,best_stage,"
      "validation_mse,stages_scanned\n";
  for (const monolith::GridLedgerEntry& e : gsr.ledger) {
    ledger += csv::format_number(e.hyperparams.learning_rate) + "," +
              std::to_string(e.hyperparams.max_depth) + "," +
              std::to_string(e.hyperparams.min_samples_leaf) + "," +
              csv::format_number(e.hyperparams.subsample) + "," +
              std::to_string(e.best_stage) + "," +
              csv::format_number(e.validation_mse) + "," +
              std::to_string(e.stages_scanned) + "\n";
  }
  csv::write_file(ledger_path, ledger);

  const monolith::TrainedMonolith model =
      monolith::train_monolith(trace, t_star, t_adapt, gsr, cfg.constants);
  const int test_begin = t_star + t_adapt + 1;
  const features::SupervisedWindow test =
      features::build_window(trace, test_begin, trace.n_minutes, cfg.constants);
  const std::vector<double> pred = monolith::forecast(
      model, trace, test_begin, trace.n_minutes, cfg.constants);

  std::string pred_csv = "t,y_true,y_pred\n";
  for (std::size_t i = 0; i < pred.size(); ++i)
    pred_csv += std::to_string(test_begin + static_cast<int>(i)) + "," +
                csv::format_number(test.y[i]) + "," +
                csv::format_number(pred[i]) + "\n";
  csv::write_file(pred_path, pred_csv);

  const auto [mse, mae] = harness::metrics(test.y, pred);
  std::cout << "grid best: lr=" << gsr.best_hyperparams.learning_rate
            << " depth=" << gsr.best_hyperparams.max_depth
            << " min_leaf=" << gsr.best_hyperparams.min_samples_leaf
            << " subsample=" << gsr.best_hyperparams.subsample
            << " trees=" << gsr.best_n_trees << "\n";
  std::cout << "test mse=" << csv::format_number(mse)
            << " mae=" << csv::format_number(mae) << "\n";
  return 0;
}

int cmd_train_saha(const std::string& config_path,
                   const std::string& trace_path, int t_star, int t_adapt,
                   double lambda_mask, double lambda_link, int swarm,
                   int iterations, std::uint64_t seed,
                   const std::string& out_dir) {
  harness::ExperimentConfig cfg = load_config_or_default(config_path);
  twin::TwinTrace trace = csv::trace_from_csv(csv::read_file(trace_path));
  trace.t_star = t_star;

  cfg.fitness.lambda_mask = lambda_mask;
  cfg.fitness.lambda_link = lambda_link;
  cfg.pso.swarm_size = swarm;
  cfg.pso.iterations = iterations;
  cfg.pso.seed = seed;
  cfg.pso.threads = cfg.threads;

  const features::SupervisedWindow adapt =
      features::build_window(trace, t_star, t_star + t_adapt, cfg.constants);
  const structopt::StructureSearchResult search = structopt::optimize_structure(
      adapt, cfg.fitness, cfg.saha_hp, cfg.pso, derive_seed(seed, 0x666974));

  fs::create_directories(out_dir);
  const auto path = [&](const std::string& n) {
    return (fs::path(out_dir) / n).string();
  };
  csv::write_file(path("structure.txt"), search.pso.best_structure.to_text());
  std::string hist = "iteration,best_fitness\n";
  for (std::size_t i = 0; i < search.pso.history.size(); ++i)
    hist += std::to_string(i) + "," +
            csv::format_number(search.pso.history[i]) + "\n";
  csv::write_file(path("pso_history.csv"), hist);

  const int test_begin = t_star + t_adapt + 1;
  const features::SupervisedWindow test =
      features::build_window(trace, test_begin, trace.n_minutes, cfg.constants);
  std::vector<double> pred = saha::predict_full(search.net, test);
  for (double& p : pred) p = twin::clip(p, 0.5, 1.0);
  std::string pred_csv = "t,y_true,y_pred\n";
  for (std::size_t i = 0; i < pred.size(); ++i)
    pred_csv += std::to_string(test_begin + static_cast<int>(i)) + "," +
                csv::format_number(test.y[i]) + "," +
                csv::format_number(pred[i]) + "\n";
  csv::write_file(path("predictions.csv"), pred_csv);

  const auto [mse, mae] = harness::metrics(test.y, pred);
  std::cout << "best fitness=" << csv::format_number(search.pso.best_fitness)
            << " evaluations=" << search.pso.evaluations
            << " cache_hits=" << search.pso.cache_hits << "\n";
  std::cout << "test mse=" << csv::format_number(mse)
            << " mae=" << csv::format_number(mae) << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir) {
  const harness::ExperimentConfig cfg = load_config_or_default(config_path);
  const harness::ExperimentResult result = harness::run_experiment(cfg);
  harness::emit_outputs(result, cfg, out_dir, config::to_json(cfg).dump(2));
  int errors = 0;
  for (const harness::MetricsRow& r : result.rows) errors += r.error ? 1 : 0;
  std::cout << "wrote " << out_dir << " (" << result.rows.size()
            << " metric rows, " << errors << " errors)\n";
  return errors == 0 ? 0 : 1;
}

int cmd_plot(const std::string& dir) {
  // Rebuilds the figure from the artifacts an experiment run left behind.
  const nlohmann::json manifest =
      nlohmann::json::parse(csv::read_file((fs::path(dir) / "manifest.json").string()));
  const harness::ExperimentConfig cfg = config::experiment_from_json(manifest);

  harness::ExperimentResult result;
  const std::uint64_t seed = cfg.seeds.front();
  harness::EpisodeRecord episode;
  episode.seed = seed;
  {
    const std::string obs = csv::read_file(
        (fs::path(dir) / ("observed_seed" + std::to_string(seed) + ".csv"))
            .string());
    std::istringstream in(obs);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      episode.spo2_obs.push_back(std::stod(line.substr(comma + 1)));
    }
  }
  result.episodes.push_back(std::move(episode));

  for (int t_adapt : cfg.t_adapt_sweep) {
    harness::CellPrediction cell;
    cell.seed = seed;
    cell.t_adapt = t_adapt;
    const std::string content = csv::read_file(
        (fs::path(dir) / ("predictions_seed" + std::to_string(seed) +
                          "_tadapt" + std::to_string(t_adapt) + ".csv"))
            .string());
    std::istringstream in(content);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string field;
      std::getline(row, field, ',');
      cell.t.push_back(std::stoi(field));
      std::getline(row, field, ',');
      cell.y_true.push_back(std::stod(field));
      std::getline(row, field, ',');
      cell.y_mono.push_back(std::stod(field));
      std::getline(row, field, ',');
      cell.y_saha.push_back(std::stod(field));
    }
    result.cells.push_back(std::move(cell));
  }

  const std::string svg_out = (fs::path(dir) / "figure1.svg").string();
  csv::write_file(svg_out,
                  harness::render_figure(result, seed, cfg.scenario.t_star,
                                         cfg.scenario.n_minutes));
  std::cout << "wrote " << svg_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oxygenation forecasting across a simulated phase transition"};
  app.require_subcommand(1);

  std::string config_path, out_path, out_dir = "out", trace_path;
  std::uint64_t seed = 1;
  int t_star = 360, t_adapt = 10;
  double lambda_mask = 3e-6, lambda_link = 3e-6;
  int swarm = 30, iterations = 30;

  CLI::App* sim = app.add_subcommand("simulate", "Generate an episode trace CSV");
  sim->add_option("--config", config_path, "JSON config file");
  sim->add_option("--seed", seed, "Scenario seed");
  sim->add_option("--out", out_path, "Output trace CSV (default <out-dir>/trace.csv)");
  sim->add_option("--out-dir", out_dir, "Output directory");

  CLI::App* feat = app.add_subcommand("features", "Emit the feature CSV for a trace");
  feat->add_option("--config", config_path, "JSON config file");
  feat->add_option("--seed", seed, "Scenario seed (when generating)");
  feat->add_option("--trace", trace_path, "Existing trace CSV to read");
  feat->add_option("--out", out_path, "Output feature CSV (default <out-dir>/features.csv)");
  feat->add_option("--out-dir", out_dir, "Output directory");

  CLI::App* mono = app.add_subcommand("train-monolith",
                                      "Grid-search, refit, and forecast");
  mono->add_option("--config", config_path, "JSON config file");
  mono->add_option("--trace", trace_path, "Trace CSV")->required();
  mono->add_option("--t-star", t_star, "Transition minute");
  mono->add_option("--t-adapt", t_adapt, "Adaptation window, minutes");
  std::string ledger_path = "grid_ledger.csv", pred_path = "predictions.csv";
  mono->add_option("--ledger-out", ledger_path, "Grid ledger CSV path");
  mono->add_option("--pred-out", pred_path, "Prediction CSV path");

  CLI::App* sahac = app.add_subcommand("train-saha",
                                       "Structure search and forecast");
  sahac->add_option("--config", config_path, "JSON config file");
  sahac->add_option("--trace", trace_path, "Trace CSV")->required();
  sahac->add_option("--t-star", t_star, "Transition minute");
  sahac->add_option("--t-adapt", t_adapt, "Adaptation window, minutes");
  sahac->add_option("--lambda-mask", lambda_mask, "Penalty per active mask bit");
  sahac->add_option("--lambda-link", lambda_link, "Penalty per active link");
  sahac->add_option("--swarm", swarm, "Swarm size");
  sahac->add_option("--iterations", iterations, "PSO iterations");
  sahac->add_option("--seed", seed, "Optimizer seed");
  sahac->add_option("--out-dir", out_dir, "Output directory");

  CLI::App* exp = app.add_subcommand("experiment",
                                     "Full adaptation-horizon sweep");
  exp->add_option("--config", config_path, "JSON config file");
  exp->add_option("--out-dir", out_dir, "Output directory");

  CLI::App* plot = app.add_subcommand("plot", "Rebuild the figure from outputs");
  plot->add_option("--dir", out_dir, "Experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const auto default_out = [&](const char* name) {
    if (!out_path.empty()) return out_path;
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
  };

  try {
    if (sim->parsed()) return cmd_simulate(config_path, seed, default_out("trace.csv"));
    if (feat->parsed())
      return cmd_features(config_path, seed, trace_path, default_out("features.csv"));
    if (mono->parsed())
      return cmd_train_monolith(config_path, trace_path, t_star, t_adapt,
                                ledger_path, pred_path);
    if (sahac->parsed())
      return cmd_train_saha(config_path, trace_path, t_star, t_adapt,
                            lambda_mask, lambda_link, swarm, iterations, seed,
                            out_dir);
    if (exp->parsed()) return cmd_experiment(config_path, out_dir);
    if (plot->parsed()) return cmd_plot(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
