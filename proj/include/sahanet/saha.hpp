#pragma once

/**
 * @file saha.hpp
 * @brief Two-level hierarchical agent network for SpO2 forecasting.
 *
 * Three physiological agents (ventilation/dead space, A-a gradient, shunt)
 * each observe a masked subset of the 13 features and produce private
 * one-step forecasts. A binary link matrix routes private forecasts between
 * agents; each agent blends its own forecast with the uniform mean of its
 * permitted senders through a convex weight fitted by least squares. A
 * supervisor regressor fuses the three updated forecasts into the final
 * prediction.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahanet/features.hpp"
#include "sahanet/gbdt.hpp"
#include "sahanet/rng.hpp"

namespace sahanet::saha {

inline constexpr int kNumAgents = 3;

enum AgentId : int { kVentilation = 0, kGradient = 1, kShunt = 2 };

/// The structural degrees of freedom: one feature mask per agent plus a
/// directed link matrix with zero diagonal. links[j][i] = 1 permits agent j
/// to send its private forecast to agent i.
struct NetworkStructure {
  std::array<std::array<std::uint8_t, features::kFeatureCount>, kNumAgents>
      masks{};
  std::array<std::array<std::uint8_t, kNumAgents>, kNumAgents> links{};

  void validate() const {
    for (int i = 0; i < kNumAgents; ++i) {
      if (links[i][i] != 0)
        throw std::invalid_argument("structure: link diagonal must be zero");
      int active = 0;
      for (std::uint8_t b : masks[i]) {
        if (b != 0 && b != 1)
          throw std::invalid_argument("structure: mask bits must be 0/1");
        active += b;
      }
      if (active == 0)
        throw std::invalid_argument("structure: empty agent mask");
      for (std::uint8_t b : links[i])
        if (b != 0 && b != 1)
          throw std::invalid_argument("structure: link bits must be 0/1");
    }
  }

  int active_mask_bits() const {
    int total = 0;
    for (const auto& m : masks)
      for (std::uint8_t b : m) total += b;
    return total;
  }

  int active_links() const {
    int total = 0;
    for (const auto& row : links)
      for (std::uint8_t b : row) total += b;
    return total;
  }

  std::vector<int> active_columns(int agent) const {
    std::vector<int> cols;
    for (int f = 0; f < features::kFeatureCount; ++f)
      if (masks[static_cast<std::size_t>(agent)][static_cast<std::size_t>(f)])
        cols.push_back(f);
    return cols;
  }

  std::string mask_bits(int agent) const {
    std::string s(features::kFeatureCount, '0');
    for (int f = 0; f < features::kFeatureCount; ++f)
      if (masks[static_cast<std::size_t>(agent)][static_cast<std::size_t>(f)])
        s[static_cast<std::size_t>(f)] = '1';
    return s;
  }

  /// Row-major 9-character link bitstring.
  std::string link_bits() const {
    std::string s(kNumAgents * kNumAgents, '0');
    for (int j = 0; j < kNumAgents; ++j)
      for (int i = 0; i < kNumAgents; ++i)
        if (links[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
          s[static_cast<std::size_t>(j * kNumAgents + i)] = '1';
    return s;
  }

  /// Audit form: three mask bitstrings then the link bitstring.
  std::string to_text() const {
    return mask_bits(0) + "\n" + mask_bits(1) + "\n" + mask_bits(2) + "\n" +
           link_bits() + "\n";
  }
};

/// Physiological prior: the ventilation agent favors the mechanics
/// features, the gradient and shunt agents favor the oxygenation features,
/// and no links are active.
inline NetworkStructure prior_structure() {
  using namespace features;
  NetworkStructure s;
  for (int f : {kPeep, kVt, kRr, kCl, kDeltaPeep, kDeltaRr, kVa})
    s.masks[kVentilation][static_cast<std::size_t>(f)] = 1;
  for (int agent : {kGradient, kShunt})
    for (int f : {kFiO2, kPeep, kProne, kPao2, kPaco2, kDeltaFiO2, kDeltaPeep,
                  kDeltaProne})
      s.masks[static_cast<std::size_t>(agent)][static_cast<std::size_t>(f)] = 1;
  return s;
}

struct SahaHyperparams {
  gbdt::GbdtHyperparams agent;
  gbdt::GbdtHyperparams supervisor;
};

inline SahaHyperparams default_saha_hyperparams() {
  SahaHyperparams hp;
  hp.agent.n_estimators = 300;
  hp.agent.learning_rate = 0.05;
  hp.agent.max_depth = 3;
  hp.agent.min_samples_leaf = 4;
  hp.agent.subsample = 1.0;
  hp.supervisor.n_estimators = 200;
  hp.supervisor.learning_rate = 0.05;
  hp.supervisor.max_depth = 2;
  hp.supervisor.min_samples_leaf = 4;
  hp.supervisor.subsample = 1.0;
  return hp;
}

/// A fully fitted network: agent ensembles over their masked columns, the
/// convex blend weights, and the supervisor. Immutable once fitted.
struct TrainedSahaNet {
  NetworkStructure structure;
  std::array<gbdt::GradientBoostedEnsemble, kNumAgents> agent_models;
  std::array<std::vector<int>, kNumAgents> agent_columns;
  std::array<double, kNumAgents> lambdas{};
  gbdt::GradientBoostedEnsemble supervisor_model;
};

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

/// Uniform mean of the private forecasts permitted to reach `receiver`;
/// with no permitted senders, the receiver hears only itself.
inline double neighbor_aggregate(const std::array<double, kNumAgents>& privates,
                                 const NetworkStructure& s, int receiver) {
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j < kNumAgents; ++j) {
    if (j == receiver) continue;
    if (s.links[static_cast<std::size_t>(j)][static_cast<std::size_t>(receiver)]) {
      sum += privates[static_cast<std::size_t>(j)];
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count)
                   : privates[static_cast<std::size_t>(receiver)];
}

/// Least-squares convex weight for blending a private forecast toward its
/// neighbor aggregate, projected onto [0, 1). Degenerate when the aggregate
/// never differs from the private forecast, in which case the weight is 0.
inline double fit_lambda(const std::vector<double>& private_fc,
                         const std::vector<double>& aggregate_fc,
                         const std::vector<double>& targets) {
  if (private_fc.empty() || private_fc.size() != aggregate_fc.size() ||
      private_fc.size() != targets.size())
    throw std::invalid_argument("fit_lambda: series misaligned or empty");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < private_fc.size(); ++i) {
    const double d = aggregate_fc[i] - private_fc[i];
    num += d * (targets[i] - private_fc[i]);
    den += d * d;
  }
  if (den == 0.0) return 0.0;
  const double lambda = num / den;
  return std::min(std::max(lambda, 0.0), 1.0 - 1e-6);
}

/// Convex blend; the result lies in the closed interval spanned by the two
/// inputs, exactly. Identical inputs or lambda = 0 reproduce the private
/// forecast bit-for-bit.
inline double convex_update(double private_fc, double aggregate_fc,
                            double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw std::invalid_argument("convex_update: lambda outside [0,1)");
  const double blended = private_fc + lambda * (aggregate_fc - private_fc);
  const double lo = std::min(private_fc, aggregate_fc);
  const double hi = std::max(private_fc, aggregate_fc);
  return std::min(std::max(blended, lo), hi);
}

struct PrivateForecasts {
  std::array<gbdt::GradientBoostedEnsemble, kNumAgents> models;
  std::array<std::vector<int>, kNumAgents> columns;
  std::array<std::vector<double>, kNumAgents> forecasts;
};

namespace detail {
inline constexpr std::uint64_t kAgentStream = 0x6167656e;
inline constexpr std::uint64_t kSupervisorStream = 0x73757065;
}  // namespace detail

/// Fits each agent on the column selection of its mask and returns the
/// in-window one-step forecasts.
inline PrivateForecasts private_forecasts(const NetworkStructure& s,
                                          const features::SupervisedWindow& w,
                                          const gbdt::GbdtHyperparams& hp_agent,
                                          std::uint64_t seed) {
  s.validate();
  if (w.size() == 0)
    throw std::invalid_argument("private_forecasts: empty window");
  PrivateForecasts out;
  for (int i = 0; i < kNumAgents; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    out.columns[si] = s.active_columns(i);
    const Matrix z = select_columns(w.x, out.columns[si]);
    gbdt::GbdtHyperparams hp = hp_agent;
    hp.rng_seed = derive_seed(seed, detail::kAgentStream,
                              static_cast<std::uint64_t>(i));
    out.models[si] = gbdt::fit(z, w.y, hp);
    out.forecasts[si] = out.models[si].predict(z);
  }
  return out;
}

/// Supervisor fusion: a regressor over the three updated agent forecasts.
inline gbdt::GradientBoostedEnsemble fit_supervisor(
    const std::array<std::vector<double>, kNumAgents>& updated,
    const std::vector<double>& targets, const gbdt::GbdtHyperparams& hp_sup,
    std::uint64_t seed) {
  const std::size_t n = targets.size();
  for (const auto& u : updated)
    if (u.size() != n)
      throw std::invalid_argument("fit_supervisor: series misaligned");
  Matrix x(n, kNumAgents);
  for (std::size_t r = 0; r < n; ++r)
    for (int i = 0; i < kNumAgents; ++i)
      x.at(r, static_cast<std::size_t>(i)) = updated[static_cast<std::size_t>(i)][r];
  gbdt::GbdtHyperparams hp = hp_sup;
  hp.rng_seed = derive_seed(seed, detail::kSupervisorStream);
  return gbdt::fit(x, targets, hp);
}

/// Full pipeline on one window: private fits, neighbor aggregation, convex
/// weight fits, supervisor fit. Deterministic given (structure, window,
/// hyperparameters, seed).
inline TrainedSahaNet fit_full(const NetworkStructure& s,
                               const features::SupervisedWindow& w,
                               const SahaHyperparams& hp, std::uint64_t seed) {
  if (w.size() < 2)
    throw std::invalid_argument(
        "fit_full: window too small for agent and blend fits");
  TrainedSahaNet net;
  net.structure = s;

  PrivateForecasts pf = private_forecasts(s, w, hp.agent, seed);
  net.agent_models = std::move(pf.models);
  net.agent_columns = std::move(pf.columns);

  const std::size_t n = w.size();
  std::array<std::vector<double>, kNumAgents> aggregates;
  for (int i = 0; i < kNumAgents; ++i)
    aggregates[static_cast<std::size_t>(i)].resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::array<double, kNumAgents> p = {pf.forecasts[0][t],
                                              pf.forecasts[1][t],
                                              pf.forecasts[2][t]};
    for (int i = 0; i < kNumAgents; ++i)
      aggregates[static_cast<std::size_t>(i)][t] = neighbor_aggregate(p, s, i);
  }

  std::array<std::vector<double>, kNumAgents> updated;
  for (int i = 0; i < kNumAgents; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    net.lambdas[si] = fit_lambda(pf.forecasts[si], aggregates[si], w.y);
    updated[si].resize(n);
    for (std::size_t t = 0; t < n; ++t)
      updated[si][t] =
          convex_update(pf.forecasts[si][t], aggregates[si][t], net.lambdas[si]);
  }

  net.supervisor_model = fit_supervisor(updated, w.y, hp.supervisor, seed);
  return net;
}

/// Replays the frozen pipeline over new rows; uses only features at t.
inline std::vector<double> predict_full(const TrainedSahaNet& net,
                                        const Matrix& x) {
  if (x.cols != features::kFeatureCount)
    throw std::invalid_argument("predict_full: feature count mismatch");
  std::array<std::vector<double>, kNumAgents> privates;
  for (int i = 0; i < kNumAgents; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    privates[si] = net.agent_models[si].predict(
        select_columns(x, net.agent_columns[si]));
  }
  Matrix sup_x(x.rows, kNumAgents);
  for (std::size_t t = 0; t < x.rows; ++t) {
    const std::array<double, kNumAgents> p = {privates[0][t], privates[1][t],
                                              privates[2][t]};
    for (int i = 0; i < kNumAgents; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      const double agg = neighbor_aggregate(p, net.structure, i);
      sup_x.at(t, si) = convex_update(p[si], agg, net.lambdas[si]);
    }
  }
  return net.supervisor_model.predict(sup_x);
}

inline std::vector<double> predict_full(const TrainedSahaNet& net,
                                        const features::SupervisedWindow& w) {
  return predict_full(net, w.x);
}

}  // namespace sahanet::saha
