#pragma once

/**
 * @file harness.hpp
 * @brief Experiment orchestration: episode generation, the adaptation-
 * horizon sweep for both models, metrics, and output artifacts.
 *
 * For every seed the harness simulates one episode, pre-trains both models
 * on the pre-transition window, then for each adaptation horizon T refits
 * the monolith on [1, t_star+T) and re-optimizes the network structure on
 * [t_star, t_star+T). Both models are scored on (t_star+T, N-1]. Training
 * and test minutes never overlap; that is asserted per cell.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sahanet/csv.hpp"
#include "sahanet/features.hpp"
#include "sahanet/monolith.hpp"
#include "sahanet/saha.hpp"
#include "sahanet/structopt.hpp"
#include "sahanet/svg.hpp"
#include "sahanet/twin.hpp"

namespace sahanet::harness {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  twin::ScenarioConfig scenario;
  twin::TwinConstants constants;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<int> t_adapt_sweep = {5, 10, 50, 100, 150, 200};
  monolith::GridSearchConfig grid;
  structopt::PsoConfig pso;
  structopt::FitnessConfig fitness;
  saha::SahaHyperparams saha_hp = saha::default_saha_hyperparams();
  int threads = 1;

  void validate() const {
    scenario.validate();
    constants.validate();
    grid.validate();
    pso.validate();
    fitness.validate();
    if (seeds.empty()) throw std::invalid_argument("experiment: no seeds");
    if (t_adapt_sweep.empty())
      throw std::invalid_argument("experiment: empty adaptation sweep");
    for (int t : t_adapt_sweep) {
      if (t < 0) throw std::invalid_argument("experiment: negative T_adapt");
      if (scenario.t_star + t >= scenario.n_minutes - 30)
        throw std::invalid_argument(
            "experiment: T_adapt leaves fewer than 30 test minutes");
    }
  }
};

struct MetricsRow {
  std::uint64_t seed = 0;
  std::string model;
  int t_adapt = 0;
  double mse = 0.0;
  double mae = 0.0;
  int test_begin = 0;  ///< first test minute
  int test_end = 0;    ///< last test minute (inclusive)
  bool error = false;
  std::string error_message;
};

struct CellPrediction {
  std::uint64_t seed = 0;
  int t_adapt = 0;
  std::vector<int> t;
  std::vector<double> y_true, y_mono, y_saha;
};

struct SahaCellAudit {
  std::uint64_t seed = 0;
  int t_adapt = 0;
  std::string structure_text;
  std::vector<double> pso_history;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::vector<double> spo2_obs;
  double grid_validation_mse = 0.0;
  std::size_t grid_best_n_trees = 0;
  double prior_fit_mse = 0.0;  ///< pre-switch network, pre-window MSE
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::vector<CellPrediction> cells;
  std::vector<SahaCellAudit> audits;
  std::vector<EpisodeRecord> episodes;
};

/// Standard error metrics over aligned series.
inline std::pair<double, double> metrics(const std::vector<double>& y_true,
                                         const std::vector<double>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw std::invalid_argument("metrics: series misaligned or empty");
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_pred[i] - y_true[i];
    se += d * d;
    ae += std::fabs(d);
  }
  const double n = static_cast<double>(y_true.size());
  return {se / n, ae / n};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {
inline constexpr std::uint64_t kGridStream = 0x67726964;
inline constexpr std::uint64_t kPriorStream = 0x7072696f;
inline constexpr std::uint64_t kPsoStream = 0x70736f00;
inline constexpr std::uint64_t kFitStream = 0x66697400;
}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  const int t_star = cfg.scenario.t_star;
  const int n = cfg.scenario.n_minutes;

  for (std::uint64_t seed : cfg.seeds) {
    const twin::Scenario scenario =
        twin::generate_scenario(cfg.scenario, seed, cfg.constants);
    const twin::TwinTrace trace = twin::simulate(scenario, cfg.constants);

    EpisodeRecord episode;
    episode.seed = seed;
    episode.spo2_obs = trace.spo2_obs;

    const features::SupervisedWindow pre =
        features::build_window(trace, 1, t_star, cfg.constants);

    monolith::GridSearchConfig grid_cfg = cfg.grid;
    grid_cfg.seed = derive_seed(seed, detail::kGridStream);
    grid_cfg.threads = cfg.threads;
    const monolith::GridSearchResult gsr = monolith::grid_search(pre, grid_cfg);
    episode.grid_validation_mse = gsr.validation_mse;
    episode.grid_best_n_trees = gsr.best_n_trees;

    // Pre-switch network on the physiological prior.
    const saha::TrainedSahaNet prior_net =
        saha::fit_full(saha::prior_structure(), pre, cfg.saha_hp,
                       derive_seed(seed, detail::kPriorStream));
    episode.prior_fit_mse =
        metrics(pre.y, saha::predict_full(prior_net, pre)).first;
    result.episodes.push_back(std::move(episode));

    for (int t_adapt : cfg.t_adapt_sweep) {
      const int test_begin = t_star + t_adapt + 1;
      const int last_train_minute = t_star + t_adapt - 1;
      if (test_begin <= last_train_minute)
        throw std::logic_error("experiment: training/test ranges overlap");
      const features::SupervisedWindow test =
          features::build_window(trace, test_begin, n, cfg.constants);

      CellPrediction cell;
      cell.seed = seed;
      cell.t_adapt = t_adapt;
      for (int t = test_begin; t < n; ++t) cell.t.push_back(t);
      cell.y_true = test.y;
      cell.y_mono.assign(test.size(),
                         std::numeric_limits<double>::quiet_NaN());
      cell.y_saha.assign(test.size(),
                         std::numeric_limits<double>::quiet_NaN());

      {
        MetricsRow row;
        row.seed = seed;
        row.model = "monolith";
        row.t_adapt = t_adapt;
        row.test_begin = test_begin;
        row.test_end = n - 1;
        try {
          const monolith::TrainedMonolith mono =
              monolith::train_monolith(trace, t_star, t_adapt, gsr,
                                       cfg.constants);
          cell.y_mono =
              monolith::forecast(mono, trace, test_begin, n, cfg.constants);
          const auto [mse, mae] = metrics(test.y, cell.y_mono);
          row.mse = mse;
          row.mae = mae;
        } catch (const std::exception& e) {
          row.error = true;
          row.error_message = e.what();
        }
        result.rows.push_back(row);
      }

      {
        MetricsRow row;
        row.seed = seed;
        row.model = "saha";
        row.t_adapt = t_adapt;
        row.test_begin = test_begin;
        row.test_end = n - 1;
        try {
          const features::SupervisedWindow adapt = features::build_window(
              trace, t_star, t_star + t_adapt, cfg.constants);
          structopt::PsoConfig pso_cfg = cfg.pso;
          pso_cfg.seed = derive_seed(seed, detail::kPsoStream,
                                     static_cast<std::uint64_t>(t_adapt));
          pso_cfg.threads = cfg.threads;
          const structopt::StructureSearchResult search =
              structopt::optimize_structure(
                  adapt, cfg.fitness, cfg.saha_hp, pso_cfg,
                  derive_seed(seed, detail::kFitStream,
                              static_cast<std::uint64_t>(t_adapt)));
          cell.y_saha = saha::predict_full(search.net, test);
          for (double& p : cell.y_saha) p = twin::clip(p, 0.5, 1.0);
          const auto [mse, mae] = metrics(test.y, cell.y_saha);
          row.mse = mse;
          row.mae = mae;

          SahaCellAudit audit;
          audit.seed = seed;
          audit.t_adapt = t_adapt;
          audit.structure_text = search.pso.best_structure.to_text();
          audit.pso_history = search.pso.history;
          result.audits.push_back(std::move(audit));
        } catch (const std::exception& e) {
          row.error = true;
          row.error_message = e.what();
        }
        result.rows.push_back(row);
      }

      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output artifacts
// ---------------------------------------------------------------------------

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "seed,model,t_adapt,mse,mae,test_begin,test_end,status\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.seed) + "," + r.model + "," +
           std::to_string(r.t_adapt) + ",";
    out += r.error ? "nan" : csv::format_number(r.mse);
    out += ",";
    out += r.error ? "nan" : csv::format_number(r.mae);
    out += "," + std::to_string(r.test_begin) + "," +
           std::to_string(r.test_end) + ",";
    out += r.error ? "error" : "ok";
    out += '\n';
  }
  return out;
}

inline std::string cell_to_csv(const CellPrediction& cell) {
  std::string out = "t,y_true,y_mono,y_saha\n";
  for (std::size_t i = 0; i < cell.t.size(); ++i) {
    out += std::to_string(cell.t[i]) + "," +
           csv::format_number(cell.y_true[i]) + "," +
           csv::format_number(cell.y_mono[i]) + "," +
           csv::format_number(cell.y_saha[i]) + '\n';
  }
  return out;
}

/// Builds the sweep figure for one seed: a panel per adaptation horizon
/// showing observed SpO2 with both forecasts over the test range.
inline std::string render_figure(const ExperimentResult& result,
                                 std::uint64_t seed, int t_star,
                                 int n_minutes) {
  const EpisodeRecord* episode = nullptr;
  for (const EpisodeRecord& e : result.episodes)
    if (e.seed == seed) episode = &e;
  if (episode == nullptr)
    throw std::invalid_argument("render_figure: unknown seed");

  const double t_min = std::max(1, t_star - 120);
  const double t_max = static_cast<double>(n_minutes - 1);

  std::vector<svg::Panel> panels;
  for (const CellPrediction& cell : result.cells) {
    if (cell.seed != seed) continue;
    svg::Panel panel;
    panel.title = "T_adapt = " + std::to_string(cell.t_adapt) + " min";
    panel.vlines = {static_cast<double>(t_star),
                    static_cast<double>(t_star + cell.t_adapt)};

    svg::Series observed;
    observed.color = "#7f7f7f";
    observed.width = 1.0;
    for (int t = static_cast<int>(t_min); t <= n_minutes; ++t) {
      observed.t.push_back(t);
      observed.v.push_back(episode->spo2_obs[static_cast<std::size_t>(t - 1)]);
    }
    panel.series.push_back(std::move(observed));

    // Forecast for minute t+1 is plotted at its target minute.
    svg::Series mono, saha_s;
    mono.color = "#d62728";
    saha_s.color = "#1f77b4";
    for (std::size_t i = 0; i < cell.t.size(); ++i) {
      const double target_minute = static_cast<double>(cell.t[i] + 1);
      if (!std::isnan(cell.y_mono[i])) {
        mono.t.push_back(target_minute);
        mono.v.push_back(cell.y_mono[i]);
      }
      if (!std::isnan(cell.y_saha[i])) {
        saha_s.t.push_back(target_minute);
        saha_s.v.push_back(cell.y_saha[i]);
      }
    }
    panel.series.push_back(std::move(mono));
    panel.series.push_back(std::move(saha_s));
    panels.push_back(std::move(panel));
  }

  return svg::render_grid(panels,
                          "One-step-ahead SpO2 forecasts across the "
                          "transition (seed " +
                              std::to_string(seed) + ")",
                          t_min, t_max, 0.5, 1.0);
}

/// Writes metrics, per-cell predictions, structure audits, swarm history,
/// per-seed observed series, the figure, and a run manifest.
inline void emit_outputs(const ExperimentResult& result,
                         const ExperimentConfig& cfg,
                         const std::string& out_dir,
                         const std::string& config_echo) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory: " + out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(out_dir) / name).string();
  };

  csv::write_file(path("metrics.csv"), metrics_to_csv(result.rows));

  for (const CellPrediction& cell : result.cells)
    csv::write_file(path("predictions_seed" + std::to_string(cell.seed) +
                         "_tadapt" + std::to_string(cell.t_adapt) + ".csv"),
                    cell_to_csv(cell));

  for (const SahaCellAudit& audit : result.audits) {
    csv::write_file(path("structure_seed" + std::to_string(audit.seed) +
                         "_tadapt" + std::to_string(audit.t_adapt) + ".txt"),
                    audit.structure_text);
    std::string hist = "iteration,best_fitness\n";
    for (std::size_t i = 0; i < audit.pso_history.size(); ++i)
      hist += std::to_string(i) + "," +
              csv::format_number(audit.pso_history[i]) + '\n';
    csv::write_file(path("pso_history_seed" + std::to_string(audit.seed) +
                         "_tadapt" + std::to_string(audit.t_adapt) + ".csv"),
                    hist);
  }

  for (const EpisodeRecord& e : result.episodes) {
    std::string obs = "t,SpO2_obs\n";
    for (std::size_t i = 0; i < e.spo2_obs.size(); ++i)
      obs += std::to_string(i + 1) + "," + csv::format_number(e.spo2_obs[i]) +
             '\n';
    csv::write_file(path("observed_seed" + std::to_string(e.seed) + ".csv"),
                    obs);
  }

  if (!cfg.seeds.empty())
    csv::write_file(path("figure1.svg"),
                    render_figure(result, cfg.seeds.front(),
                                  cfg.scenario.t_star, cfg.scenario.n_minutes));

  csv::write_file(path("manifest.json"), config_echo);
}

}  // namespace sahanet::harness
