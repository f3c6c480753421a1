#pragma once

/**
 * @file monolith.hpp
 * @brief Monolithic forecasting baseline.
 *
 * Pre-transition hyperparameter grid search with per-configuration early
 * stopping on a held-out validation tail, then a refit on the chosen
 * configuration over pre-transition data plus the post-transition
 * adaptation window.
 */

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sahanet/features.hpp"
#include "sahanet/gbdt.hpp"
#include "sahanet/parallel.hpp"
#include "sahanet/twin.hpp"

namespace sahanet::monolith {

struct GridSearchConfig {
  std::vector<double> learning_rates = {0.01, 0.05};
  std::vector<int> max_depths = {2, 3};
  std::vector<int> min_samples_leaves = {4, 8};
  std::vector<double> subsamples = {0.7, 1.0};
  int tree_budget = 1200;
  int patience = 10;
  double validation_fraction = 0.2;  ///< tail of the pre-transition window
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (learning_rates.empty() || max_depths.empty() ||
        min_samples_leaves.empty() || subsamples.empty())
      throw std::invalid_argument("grid_search: empty grid dimension");
    if (tree_budget < 1 || patience < 1)
      throw std::invalid_argument("grid_search: invalid budget or patience");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw std::invalid_argument("grid_search: validation fraction in (0,1)");
  }
};

struct GridLedgerEntry {
  gbdt::GbdtHyperparams hyperparams;
  std::size_t best_stage = 0;
  double validation_mse = 0.0;
  std::size_t stages_scanned = 0;
};

struct GridSearchResult {
  gbdt::GbdtHyperparams best_hyperparams;
  std::size_t best_n_trees = 0;
  double validation_mse = 0.0;
  std::vector<GridLedgerEntry> ledger;  ///< grid order
};

/// Splits the pre-transition window into an 80/20 training prefix and
/// validation tail, scans every grid point with early stopping, and returns
/// the configuration/stage pair with the lowest tail MSE. Ties break toward
/// fewer trees, then earlier grid order.
inline GridSearchResult grid_search(const features::SupervisedWindow& pre,
                                    const GridSearchConfig& cfg =
                                        GridSearchConfig{}) {
  cfg.validate();
  if (pre.size() < 50)
    throw std::invalid_argument(
        "grid_search: pre-transition window needs at least 50 rows");

  const std::size_t n = pre.size();
  const std::size_t n_train = n - static_cast<std::size_t>(
                                      std::floor(cfg.validation_fraction *
                                                 static_cast<double>(n)));
  Matrix x_train(n_train, pre.x.cols), x_val(n - n_train, pre.x.cols);
  std::vector<double> y_train(pre.y.begin(),
                              pre.y.begin() + static_cast<long>(n_train));
  std::vector<double> y_val(pre.y.begin() + static_cast<long>(n_train),
                            pre.y.end());
  std::copy(pre.x.values.begin(),
            pre.x.values.begin() + static_cast<long>(n_train * pre.x.cols),
            x_train.values.begin());
  std::copy(pre.x.values.begin() + static_cast<long>(n_train * pre.x.cols),
            pre.x.values.end(), x_val.values.begin());

  std::vector<gbdt::GbdtHyperparams> grid;
  for (double lr : cfg.learning_rates)
    for (int depth : cfg.max_depths)
      for (int leaf : cfg.min_samples_leaves)
        for (double sub : cfg.subsamples) {
          gbdt::GbdtHyperparams hp;
          hp.n_estimators = cfg.tree_budget;
          hp.learning_rate = lr;
          hp.max_depth = depth;
          hp.min_samples_leaf = leaf;
          hp.subsample = sub;
          hp.rng_seed = derive_seed(cfg.seed, grid.size());
          grid.push_back(hp);
        }

  GridSearchResult result;
  result.ledger.resize(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const gbdt::EarlyStopFit esf = gbdt::fit_with_validation(
        x_train, y_train, &x_val, &y_val, grid[i], cfg.patience);
    result.ledger[i] = {grid[i], esf.best_stage, esf.best_mse,
                        esf.stages_scanned};
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.ledger.size(); ++i) {
    const GridLedgerEntry& e = result.ledger[i];
    const GridLedgerEntry& b = result.ledger[best];
    if (e.validation_mse < b.validation_mse ||
        (e.validation_mse == b.validation_mse && e.best_stage < b.best_stage))
      best = i;
  }
  result.best_hyperparams = result.ledger[best].hyperparams;
  result.best_n_trees = result.ledger[best].best_stage;
  result.validation_mse = result.ledger[best].validation_mse;
  return result;
}

/// Monolith trained over minutes [train_begin, train_end).
struct TrainedMonolith {
  gbdt::GradientBoostedEnsemble model;
  int train_begin = 1;
  int train_end = 0;
};

/// Refits the selected configuration, at its selected tree count, on all
/// rows in [1, t_star + t_adapt): the pre-transition window plus the
/// adaptation window.
inline TrainedMonolith train_monolith(const twin::TwinTrace& trace, int t_star,
                                      int t_adapt, const GridSearchResult& gsr,
                                      const twin::TwinConstants& c =
                                          twin::TwinConstants{}) {
  if (t_adapt < 0 || t_star + t_adapt >= trace.n_minutes)
    throw std::invalid_argument("train_monolith: adaptation window leaves no data");
  const features::SupervisedWindow w =
      features::build_window(trace, 1, t_star + t_adapt, c);
  gbdt::GbdtHyperparams hp = gsr.best_hyperparams;
  hp.n_estimators = std::max<std::size_t>(gsr.best_n_trees, 1);
  gbdt::GradientBoostedEnsemble model = gbdt::fit(w.x, w.y, hp);
  if (gsr.best_n_trees == 0) model = model.truncate(0);
  return {std::move(model), 1, t_star + t_adapt};
}

/// One-step-ahead forecasts for minutes [t_begin, t_end): prediction for
/// minute t+1 uses only features at t. Outputs are clipped to the
/// observable saturation range for reporting. The test range must not touch
/// the training window.
inline std::vector<double> forecast(const TrainedMonolith& m,
                                    const twin::TwinTrace& trace, int t_begin,
                                    int t_end,
                                    const twin::TwinConstants& c =
                                        twin::TwinConstants{}) {
  if (t_begin < m.train_end)
    throw std::logic_error("forecast: test range overlaps training window");
  const features::SupervisedWindow w =
      features::build_window(trace, t_begin, t_end, c);
  std::vector<double> pred = m.model.predict(w.x);
  for (double& p : pred) p = twin::clip(p, 0.5, 1.0);
  return pred;
}

}  // namespace sahanet::monolith
