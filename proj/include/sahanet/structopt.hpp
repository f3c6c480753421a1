#pragma once

/**
 * @file structopt.hpp
 * @brief Binary structure search by particle swarm optimization.
 *
 * Particles move in the continuous box [0,1]^48 (39 mask coordinates plus 9
 * link coordinates). At evaluation time a position is thresholded at 0.5,
 * the link diagonal is forced to zero, and any all-zero mask is repaired by
 * activating one randomly chosen bit. The objective is the adaptation-window
 * MSE of a freshly fitted network plus L0 penalties on active mask bits and
 * links. Fitness values are memoized by the decoded bitstring.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sahanet/features.hpp"
#include "sahanet/parallel.hpp"
#include "sahanet/rng.hpp"
#include "sahanet/saha.hpp"

namespace sahanet::structopt {

inline constexpr int kMaskDims = saha::kNumAgents * features::kFeatureCount;
inline constexpr int kLinkDims = saha::kNumAgents * saha::kNumAgents;
inline constexpr int kDims = kMaskDims + kLinkDims;  // 48

using Position = std::array<double, kDims>;

struct FitnessConfig {
  double lambda_mask = 3e-6;  ///< penalty per active mask bit
  double lambda_link = 3e-6;  ///< penalty per active link

  void validate() const {
    if (lambda_mask < 0.0 || lambda_link < 0.0)
      throw std::invalid_argument("fitness: penalties must be nonnegative");
  }
};

/// Eq-style fitness composition: error term plus L0 penalties.
inline double penalized_fitness(double mse, const saha::NetworkStructure& s,
                                const FitnessConfig& cfg) {
  return mse + cfg.lambda_mask * static_cast<double>(s.active_mask_bits()) +
         cfg.lambda_link * static_cast<double>(s.active_links());
}

struct FitnessResult {
  double j = 0.0;
  saha::TrainedSahaNet net;
};

/// Trains a network on the adaptation window and scores it there: mean
/// squared error of its own window plus the structural penalties.
inline FitnessResult fitness(const saha::NetworkStructure& s,
                             const features::SupervisedWindow& adapt_window,
                             const FitnessConfig& cfg,
                             const saha::SahaHyperparams& hp,
                             std::uint64_t seed) {
  cfg.validate();
  FitnessResult out;
  out.net = saha::fit_full(s, adapt_window, hp, seed);
  const std::vector<double> pred = saha::predict_full(out.net, adapt_window);
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - adapt_window.y[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  out.j = penalized_fitness(mse, s, cfg);
  return out;
}

/// Decodes a position: bit = 1 iff the coordinate is >= 0.5, the link
/// diagonal is forced to zero, and an all-zero mask is repaired by
/// activating one bit drawn from `repair_rng`.
inline saha::NetworkStructure threshold_position(const Position& pos,
                                                 Rng& repair_rng) {
  saha::NetworkStructure s;
  for (int a = 0; a < saha::kNumAgents; ++a) {
    bool any = false;
    for (int f = 0; f < features::kFeatureCount; ++f) {
      const bool bit = pos[static_cast<std::size_t>(
                           a * features::kFeatureCount + f)] >= 0.5;
      s.masks[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] =
          bit ? 1 : 0;
      any = any || bit;
    }
    if (!any) {
      const int f = static_cast<int>(
          repair_rng.below(static_cast<std::uint64_t>(features::kFeatureCount)));
      s.masks[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] = 1;
    }
  }
  for (int j = 0; j < saha::kNumAgents; ++j)
    for (int i = 0; i < saha::kNumAgents; ++i)
      s.links[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          (j != i &&
           pos[static_cast<std::size_t>(kMaskDims + j * saha::kNumAgents + i)] >=
               0.5)
              ? 1
              : 0;
  return s;
}

inline Position encode_structure(const saha::NetworkStructure& s) {
  Position pos{};
  for (int a = 0; a < saha::kNumAgents; ++a)
    for (int f = 0; f < features::kFeatureCount; ++f)
      pos[static_cast<std::size_t>(a * features::kFeatureCount + f)] =
          s.masks[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)]
              ? 1.0
              : 0.0;
  for (int j = 0; j < saha::kNumAgents; ++j)
    for (int i = 0; i < saha::kNumAgents; ++i)
      pos[static_cast<std::size_t>(kMaskDims + j * saha::kNumAgents + i)] =
          s.links[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]
              ? 1.0
              : 0.0;
  return pos;
}

struct PsoConfig {
  int swarm_size = 30;
  int iterations = 30;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  double velocity_clamp = 0.5;
  /// Per-dimension probability of re-drawing a coordinate uniformly during
  /// a move; keeps the swarm sampling after it has collapsed onto the
  /// global best. The best-ever result is kept, so this never costs
  /// monotonicity.
  double turbulence = 0.04;
  bool seed_with_prior = true;  ///< particle 0 starts at the prior structure
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (swarm_size < 1) throw std::invalid_argument("pso: swarm_size < 1");
    if (iterations < 0) throw std::invalid_argument("pso: iterations < 0");
    if (velocity_clamp <= 0.0)
      throw std::invalid_argument("pso: velocity clamp must be positive");
    if (inertia < 0.0 || cognitive < 0.0 || social < 0.0)
      throw std::invalid_argument("pso: negative coefficient");
    if (!(turbulence >= 0.0 && turbulence <= 1.0))
      throw std::invalid_argument("pso: turbulence outside [0,1]");
  }
};

struct PsoResult {
  saha::NetworkStructure best_structure;
  double best_fitness = std::numeric_limits<double>::infinity();
  /// Global best after initialization and after each iteration
  /// (iterations + 1 entries); non-increasing.
  std::vector<double> history;
  std::size_t evaluations = 0;  ///< fitness requests, cache hits included
  std::size_t cache_hits = 0;
};

namespace detail {
inline constexpr std::uint64_t kInitStream = 0x70736f31;
inline constexpr std::uint64_t kMoveStream = 0x70736f32;
inline constexpr std::uint64_t kRepairStream = 0x70736f33;

struct Particle {
  Position position{};
  Position velocity{};
  Position best_position{};
  saha::NetworkStructure best_structure;
  double best_fitness = std::numeric_limits<double>::infinity();
  saha::NetworkStructure current_structure;
  double current_fitness = std::numeric_limits<double>::infinity();
};
}  // namespace detail

/// Global-best PSO over network structures. The objective must be a pure,
/// thread-safe function of the decoded structure; identical (objective,
/// config) pairs yield identical results at any thread count.
inline PsoResult pso_optimize(
    const std::function<double(const saha::NetworkStructure&)>& objective,
    const PsoConfig& cfg) {
  cfg.validate();
  if (!objective) throw std::invalid_argument("pso: missing objective");

  const std::size_t swarm = static_cast<std::size_t>(cfg.swarm_size);
  std::vector<detail::Particle> particles(swarm);

  Rng init_rng(derive_seed(cfg.seed, detail::kInitStream));
  for (std::size_t k = 0; k < swarm; ++k) {
    if (k == 0 && cfg.seed_with_prior) {
      particles[k].position = encode_structure(saha::prior_structure());
    } else {
      for (double& v : particles[k].position) v = init_rng.uniform();
    }
    for (double& v : particles[k].velocity)
      v = init_rng.uniform(-cfg.velocity_clamp, cfg.velocity_clamp);
  }

  PsoResult result;
  Position gbest_position{};  // continuous coordinates of the global best
  std::unordered_map<std::string, double> cache;

  // Decodes every particle for iteration `it`, evaluates uncached
  // structures (in parallel when configured), and merges serially so the
  // outcome is schedule-independent.
  auto evaluate_swarm = [&](int it) {
    std::vector<saha::NetworkStructure> decoded(swarm);
    std::vector<std::string> keys(swarm);
    std::vector<std::string> misses;
    std::vector<const saha::NetworkStructure*> miss_structs;
    for (std::size_t k = 0; k < swarm; ++k) {
      Rng repair(derive_seed(cfg.seed, detail::kRepairStream,
                             static_cast<std::uint64_t>(it), k));
      decoded[k] = threshold_position(particles[k].position, repair);
      keys[k] = decoded[k].mask_bits(0) + decoded[k].mask_bits(1) +
                decoded[k].mask_bits(2) + decoded[k].link_bits();
    }
    for (std::size_t k = 0; k < swarm; ++k) {
      if (cache.count(keys[k])) {
        ++result.cache_hits;
      } else if (std::find(misses.begin(), misses.end(), keys[k]) ==
                 misses.end()) {
        misses.push_back(keys[k]);
        miss_structs.push_back(&decoded[k]);
      } else {
        ++result.cache_hits;
      }
    }
    std::vector<double> miss_values(misses.size());
    parallel_for(misses.size(), cfg.threads, [&](std::size_t i) {
      miss_values[i] = objective(*miss_structs[i]);
    });
    for (std::size_t i = 0; i < misses.size(); ++i)
      cache.emplace(misses[i], miss_values[i]);
    for (std::size_t k = 0; k < swarm; ++k) {
      particles[k].current_structure = decoded[k];
      particles[k].current_fitness = cache.at(keys[k]);
      ++result.evaluations;
    }
  };

  auto update_bests = [&]() {
    for (std::size_t k = 0; k < swarm; ++k) {
      detail::Particle& p = particles[k];
      if (p.current_fitness < p.best_fitness) {
        p.best_fitness = p.current_fitness;
        p.best_position = p.position;
        p.best_structure = p.current_structure;
      }
      // The global best accepts ties, so on the plateaus a thresholded
      // objective creates, the social attractor keeps moving between
      // equally-good positions instead of freezing the swarm. Fitness
      // stays non-increasing either way.
      if (p.best_fitness <= result.best_fitness) {
        result.best_fitness = p.best_fitness;
        result.best_structure = p.best_structure;
        gbest_position = p.best_position;
      }
    }
  };

  evaluate_swarm(0);
  update_bests();
  result.history.push_back(result.best_fitness);

  for (int it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t k = 0; k < swarm; ++k) {
      detail::Particle& p = particles[k];
      Rng move(derive_seed(cfg.seed, detail::kMoveStream,
                           static_cast<std::uint64_t>(it), k));
      for (int d = 0; d < kDims; ++d) {
        const std::size_t sd = static_cast<std::size_t>(d);
        const double r1 = move.uniform();
        const double r2 = move.uniform();
        const double shake = move.uniform();
        const double fresh = move.uniform();
        double v = cfg.inertia * p.velocity[sd] +
                   cfg.cognitive * r1 * (p.best_position[sd] - p.position[sd]) +
                   cfg.social * r2 * (gbest_position[sd] - p.position[sd]);
        v = std::min(std::max(v, -cfg.velocity_clamp), cfg.velocity_clamp);
        p.velocity[sd] = v;
        double x = p.position[sd] + v;
        if (x > 1.0) x = 2.0 - x;
        if (x < 0.0) x = -x;
        if (shake < cfg.turbulence) {
          x = fresh;
          p.velocity[sd] = 0.0;
        }
        p.position[sd] = std::min(std::max(x, 0.0), 1.0);
      }
    }
    evaluate_swarm(it);
    update_bests();
    result.history.push_back(result.best_fitness);
  }
  return result;
}

struct StructureSearchResult {
  PsoResult pso;
  saha::TrainedSahaNet net;  ///< refit of the best structure
};

/// End-to-end structural adaptation on one window: swarm search over the
/// memoized fitness, then a deterministic refit of the winning structure.
inline StructureSearchResult optimize_structure(
    const features::SupervisedWindow& adapt_window, const FitnessConfig& fcfg,
    const saha::SahaHyperparams& hp, const PsoConfig& pcfg,
    std::uint64_t fit_seed) {
  StructureSearchResult out;
  out.pso = pso_optimize(
      [&](const saha::NetworkStructure& s) {
        return fitness(s, adapt_window, fcfg, hp, fit_seed).j;
      },
      pcfg);
  out.net = saha::fit_full(out.pso.best_structure, adapt_window, hp, fit_seed);
  return out;
}

}  // namespace sahanet::structopt
