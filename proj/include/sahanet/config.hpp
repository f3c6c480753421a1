#pragma once

/**
 * @file config.hpp
 * @brief JSON configuration for scenarios and experiments.
 *
 * Every key is optional; omitted keys keep their built-in defaults, so an
 * empty object is a complete configuration.
 */

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sahanet/harness.hpp"

namespace sahanet::config {

using nlohmann::json;

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline void apply(const json& j, twin::ScenarioConfig& c) {
  detail::get_if(j, "n_minutes", c.n_minutes);
  detail::get_if(j, "t_star", c.t_star);
  detail::get_if(j, "tau_g_min", c.tau_g_min);
  detail::get_if(j, "tau_g_max", c.tau_g_max);
  detail::get_if(j, "fio2_init", c.fio2_init);
  detail::get_if(j, "peep_init", c.peep_init);
  detail::get_if(j, "fio2_min", c.fio2_min);
  detail::get_if(j, "fio2_support_min", c.fio2_support_min);
  detail::get_if(j, "challenge_probability", c.challenge_probability);
  detail::get_if(j, "challenge_depth_min", c.challenge_depth_min);
  detail::get_if(j, "challenge_depth_max", c.challenge_depth_max);
  detail::get_if(j, "challenge_min_spo2", c.challenge_min_spo2);
  detail::get_if(j, "fio2_max", c.fio2_max);
  detail::get_if(j, "peep_min", c.peep_min);
  detail::get_if(j, "peep_max", c.peep_max);
  detail::get_if(j, "fio2_step", c.fio2_step);
  detail::get_if(j, "peep_step", c.peep_step);
  detail::get_if(j, "titration_period", c.titration_period);
  detail::get_if(j, "spo2_low", c.spo2_low);
  detail::get_if(j, "spo2_wean", c.spo2_wean);
  detail::get_if(j, "vt_per_kg", c.vt_per_kg);
  detail::get_if(j, "vt_jitter_sd", c.vt_jitter_sd);
  detail::get_if(j, "rr_base", c.rr_base);
  detail::get_if(j, "rr_span", c.rr_span);
  detail::get_if(j, "rr_jitter_sd", c.rr_jitter_sd);
  detail::get_if(j, "prone_probability", c.prone_probability);
  detail::get_if(j, "prone_delay_min", c.prone_delay_min);
  detail::get_if(j, "prone_delay_max", c.prone_delay_max);
  detail::get_if(j, "cl_pre", c.cl_pre);
  detail::get_if(j, "cl_post", c.cl_post);
  detail::get_if(j, "cl_noise_sd", c.cl_noise_sd);
  detail::get_if(j, "cl_min", c.cl_min);
  detail::get_if(j, "cl_max", c.cl_max);
}

inline void apply(const json& j, twin::TwinConstants& c) {
  detail::get_if(j, "p_b", c.p_b);
  detail::get_if(j, "p_h2o", c.p_h2o);
  detail::get_if(j, "rq", c.rq);
  detail::get_if(j, "vco2", c.vco2);
  detail::get_if(j, "svo2", c.svo2);
  detail::get_if(j, "p50", c.p50);
  detail::get_if(j, "hill_n", c.hill_n);
  detail::get_if(j, "pbw", c.pbw);
  detail::get_if(j, "vd_anat", c.vd_anat);
  detail::get_if(j, "k_rr", c.k_rr);
  detail::get_if(j, "k_cl", c.k_cl);
  detail::get_if(j, "tau_sens", c.tau_sens);
  detail::get_if(j, "sigma_obs", c.sigma_obs);
  detail::get_if(j, "dt", c.dt);
  detail::get_if(j, "sigma_aa", c.sigma_aa);
  detail::get_if(j, "sigma_shunt", c.sigma_shunt);
}

inline void apply(const json& j, monolith::GridSearchConfig& c) {
  detail::get_if(j, "learning_rates", c.learning_rates);
  detail::get_if(j, "max_depths", c.max_depths);
  detail::get_if(j, "min_samples_leaves", c.min_samples_leaves);
  detail::get_if(j, "subsamples", c.subsamples);
  detail::get_if(j, "tree_budget", c.tree_budget);
  detail::get_if(j, "patience", c.patience);
  detail::get_if(j, "validation_fraction", c.validation_fraction);
}

inline void apply(const json& j, structopt::PsoConfig& c) {
  detail::get_if(j, "swarm_size", c.swarm_size);
  detail::get_if(j, "iterations", c.iterations);
  detail::get_if(j, "inertia", c.inertia);
  detail::get_if(j, "cognitive", c.cognitive);
  detail::get_if(j, "social", c.social);
  detail::get_if(j, "velocity_clamp", c.velocity_clamp);
  detail::get_if(j, "turbulence", c.turbulence);
  detail::get_if(j, "seed_with_prior", c.seed_with_prior);
}

inline void apply(const json& j, structopt::FitnessConfig& c) {
  detail::get_if(j, "lambda_mask", c.lambda_mask);
  detail::get_if(j, "lambda_link", c.lambda_link);
}

inline void apply(const json& j, gbdt::GbdtHyperparams& c) {
  detail::get_if(j, "n_estimators", c.n_estimators);
  detail::get_if(j, "learning_rate", c.learning_rate);
  detail::get_if(j, "max_depth", c.max_depth);
  detail::get_if(j, "min_samples_leaf", c.min_samples_leaf);
  detail::get_if(j, "subsample", c.subsample);
}

inline harness::ExperimentConfig experiment_from_json(const json& j) {
  harness::ExperimentConfig cfg;
  if (j.contains("scenario")) apply(j.at("scenario"), cfg.scenario);
  if (j.contains("constants")) apply(j.at("constants"), cfg.constants);
  detail::get_if(j, "seeds", cfg.seeds);
  detail::get_if(j, "t_adapt_sweep", cfg.t_adapt_sweep);
  if (j.contains("grid")) apply(j.at("grid"), cfg.grid);
  if (j.contains("pso")) apply(j.at("pso"), cfg.pso);
  if (j.contains("fitness")) apply(j.at("fitness"), cfg.fitness);
  if (j.contains("saha")) {
    if (j.at("saha").contains("agent"))
      apply(j.at("saha").at("agent"), cfg.saha_hp.agent);
    if (j.at("saha").contains("supervisor"))
      apply(j.at("saha").at("supervisor"), cfg.saha_hp.supervisor);
  }
  detail::get_if(j, "threads", cfg.threads);
  return cfg;
}

inline json to_json(const twin::ScenarioConfig& c) {
  return json{{"n_minutes", c.n_minutes},
              {"t_star", c.t_star},
              {"tau_g_min", c.tau_g_min},
              {"tau_g_max", c.tau_g_max},
              {"fio2_init", c.fio2_init},
              {"peep_init", c.peep_init},
              {"fio2_min", c.fio2_min},
              {"fio2_support_min", c.fio2_support_min},
              {"challenge_probability", c.challenge_probability},
              {"challenge_depth_min", c.challenge_depth_min},
              {"challenge_depth_max", c.challenge_depth_max},
              {"challenge_min_spo2", c.challenge_min_spo2},
              {"fio2_max", c.fio2_max},
              {"peep_min", c.peep_min},
              {"peep_max", c.peep_max},
              {"fio2_step", c.fio2_step},
              {"peep_step", c.peep_step},
              {"titration_period", c.titration_period},
              {"spo2_low", c.spo2_low},
              {"spo2_wean", c.spo2_wean},
              {"vt_per_kg", c.vt_per_kg},
              {"vt_jitter_sd", c.vt_jitter_sd},
              {"rr_base", c.rr_base},
              {"rr_span", c.rr_span},
              {"rr_jitter_sd", c.rr_jitter_sd},
              {"prone_probability", c.prone_probability},
              {"prone_delay_min", c.prone_delay_min},
              {"prone_delay_max", c.prone_delay_max},
              {"cl_pre", c.cl_pre},
              {"cl_post", c.cl_post},
              {"cl_noise_sd", c.cl_noise_sd},
              {"cl_min", c.cl_min},
              {"cl_max", c.cl_max}};
}

inline json to_json(const twin::TwinConstants& c) {
  return json{{"p_b", c.p_b},           {"p_h2o", c.p_h2o},
              {"rq", c.rq},             {"vco2", c.vco2},
              {"svo2", c.svo2},         {"p50", c.p50},
              {"hill_n", c.hill_n},     {"pbw", c.pbw},
              {"vd_anat", c.vd_anat},   {"k_rr", c.k_rr},
              {"k_cl", c.k_cl},         {"tau_sens", c.tau_sens},
              {"sigma_obs", c.sigma_obs}, {"dt", c.dt},
              {"sigma_aa", c.sigma_aa}, {"sigma_shunt", c.sigma_shunt}};
}

inline json to_json(const gbdt::GbdtHyperparams& c) {
  return json{{"n_estimators", c.n_estimators},
              {"learning_rate", c.learning_rate},
              {"max_depth", c.max_depth},
              {"min_samples_leaf", c.min_samples_leaf},
              {"subsample", c.subsample}};
}

inline json to_json(const harness::ExperimentConfig& cfg) {
  return json{
      {"version", harness::kVersion},
      {"scenario", to_json(cfg.scenario)},
      {"constants", to_json(cfg.constants)},
      {"seeds", cfg.seeds},
      {"t_adapt_sweep", cfg.t_adapt_sweep},
      {"grid",
       {{"learning_rates", cfg.grid.learning_rates},
        {"max_depths", cfg.grid.max_depths},
        {"min_samples_leaves", cfg.grid.min_samples_leaves},
        {"subsamples", cfg.grid.subsamples},
        {"tree_budget", cfg.grid.tree_budget},
        {"patience", cfg.grid.patience},
        {"validation_fraction", cfg.grid.validation_fraction}}},
      {"pso",
       {{"swarm_size", cfg.pso.swarm_size},
        {"iterations", cfg.pso.iterations},
        {"inertia", cfg.pso.inertia},
        {"cognitive", cfg.pso.cognitive},
        {"social", cfg.pso.social},
        {"velocity_clamp", cfg.pso.velocity_clamp},
        {"turbulence", cfg.pso.turbulence},
        {"seed_with_prior", cfg.pso.seed_with_prior}}},
      {"fitness",
       {{"lambda_mask", cfg.fitness.lambda_mask},
        {"lambda_link", cfg.fitness.lambda_link}}},
      {"saha",
       {{"agent", to_json(cfg.saha_hp.agent)},
        {"supervisor", to_json(cfg.saha_hp.supervisor)}}},
      {"threads", cfg.threads}};
}

inline harness::ExperimentConfig load_experiment_config(
    const std::string& path) {
  json j;
  try {
    j = json::parse(csv::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " +
                             e.what());
  }
  return experiment_from_json(j);
}

}  // namespace sahanet::config
