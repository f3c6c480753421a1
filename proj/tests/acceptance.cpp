// Acceptance suite: one test case per criterion, each printing a
// [PASS]/[FAIL] line. Criteria 1, 2, and 8 share the default experiment
// configuration (5 seeds, the full adaptation-horizon sweep).

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "sahanet/harness.hpp"
#include "sahanet/monolith.hpp"
#include "sahanet/structopt.hpp"

using namespace sahanet;

namespace {

struct SweepSummary {
  harness::ExperimentResult result;
  double wall_seconds = 0.0;
  std::map<std::pair<std::string, int>, std::vector<double>> mse;

  double median_mse(const std::string& model, int t_adapt) const {
    return harness::median(mse.at({model, t_adapt}));
  }
};

harness::ExperimentConfig default_config() {
  return harness::ExperimentConfig{};
}

const SweepSummary& default_sweep() {
  static const SweepSummary summary = [] {
    SweepSummary s;
    const auto t0 = std::chrono::steady_clock::now();
    s.result = harness::run_experiment(default_config());
    const auto t1 = std::chrono::steady_clock::now();
    s.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    for (const harness::MetricsRow& row : s.result.rows)
      if (!row.error) s.mse[{row.model, row.t_adapt}].push_back(row.mse);
    return s;
  }();
  return summary;
}

void report(int criterion, bool pass, const char* what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              what);
  std::fflush(stdout);
}

}  // namespace

TEST_CASE("criterion 1: rapid adaptation") {
  const SweepSummary& s = default_sweep();
  const double saha10 = s.median_mse("saha", 10);
  const double mono10 = s.median_mse("monolith", 10);
  const double mono200 = s.median_mse("monolith", 200);

  const bool fast_recovery = saha10 <= 0.6 * mono10;
  const bool slow_catchup = mono200 <= 1.5 * saha10;
  const bool in_budget = s.wall_seconds <= 900.0;

  std::printf("  saha@10 = %.6g, mono@10 = %.6g (ratio %.3f, bound 0.6)\n",
              saha10, mono10, saha10 / mono10);
  std::printf("  mono@200 = %.6g (ratio vs saha@10 %.3f, bound 1.5)\n", mono200,
              mono200 / saha10);
  std::printf("  full sweep wall time %.1f s (budget 900 s)\n",
              s.wall_seconds);
  report(1, fast_recovery && slow_catchup && in_budget,
         "network recovers with ~10 adaptation minutes; monolith needs ~200");
  CHECK(fast_recovery);
  CHECK(slow_catchup);
  CHECK(in_budget);
}

TEST_CASE("criterion 2: degradation then recovery") {
  const SweepSummary& s = default_sweep();
  const double mono5 = s.median_mse("monolith", 5);
  const double mono200 = s.median_mse("monolith", 200);
  const double saha5 = s.median_mse("saha", 5);
  const double saha200 = s.median_mse("saha", 200);

  const bool mono_shape = mono5 >= 2.0 * mono200;
  const bool saha_shape = saha5 >= 2.0 * saha200;
  std::printf("  mono@5 / mono@200 = %.3f, saha@5 / saha@200 = %.3f (bound 2)\n",
              mono5 / mono200, saha5 / saha200);
  report(2, mono_shape && saha_shape,
         "both models degrade at T_adapt = 5 relative to T_adapt = 200");
  CHECK(mono_shape);
  CHECK(saha_shape);
}

TEST_CASE("criterion 3: twin invariant suite over 100 episodes") {
  std::size_t violations = 0;
  const twin::ScenarioConfig cfg;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const twin::TwinTrace tr = twin::simulate(twin::generate_scenario(cfg, seed));
    if (tr.g[static_cast<std::size_t>(tr.t_star - 1)] != 0.5) ++violations;
    double prev_g = -1.0;
    for (int i = 0; i < tr.n_minutes; ++i) {
      const bool ok =
          tr.g[i] > prev_g && tr.g[i] > 0.0 && tr.g[i] < 1.0 &&
          tr.phi_auto[i] >= 0.0 && tr.phi_auto[i] <= 0.08 &&
          tr.f_ds[i] >= 0.05 && tr.f_ds[i] <= 0.35 && tr.paco2[i] >= 25.0 &&
          tr.paco2[i] <= 80.0 && tr.aa[i] >= 5.0 && tr.aa[i] <= 80.0 &&
          tr.p_a_o2_cap[i] >= 30.0 && tr.p_a_o2_cap[i] <= 600.0 &&
          tr.shunt[i] >= 0.02 && tr.shunt[i] <= 0.45 &&
          tr.spo2_true[i] >= 0.5 && tr.spo2_true[i] <= 1.0 &&
          tr.spo2_obs[i] >= 0.5 && tr.spo2_obs[i] <= 1.0 && tr.vt_alv[i] >= 5.0;
      if (!ok) ++violations;
      prev_g = tr.g[i];
    }
  }
  // mitigation directions at zero disturbance
  for (double g = 0.05; g <= 1.0; g += 0.05) {
    for (double peep = 0.0; peep <= 23.0; peep += 1.0) {
      for (double prone : {0.0, 1.0}) {
        if (twin::aa_gradient(g, peep + 1.0, prone, 0.0) >
            twin::aa_gradient(g, peep, prone, 0.0))
          ++violations;
        if (twin::shunt_fraction(g, peep + 1.0, prone, 0.0) >
            twin::shunt_fraction(g, peep, prone, 0.0))
          ++violations;
      }
      if (twin::aa_gradient(g, peep, 1.0, 0.0) >
          twin::aa_gradient(g, peep, 0.0, 0.0))
        ++violations;
      if (twin::shunt_fraction(g, peep, 1.0, 0.0) >
          twin::shunt_fraction(g, peep, 0.0, 0.0))
        ++violations;
    }
  }
  std::printf("  violations across 100 seeded episodes: %zu\n", violations);
  report(3, violations == 0,
         "bounds, regime monotonicity, and mitigation directions");
  CHECK(violations == 0);
}

TEST_CASE("criterion 4: analytic oracles") {
  const twin::TwinConstants c;
  const bool hill_exact = twin::hill_saturation(26.6, c) == 0.5;
  const bool alpha_ok = std::fabs(c.ewma_alpha() - std::exp(-6.0)) <= 1e-9;
  const twin::Ventilation v = twin::ventilation_and_paco2(431.5, 10.0, c);
  const bool paco2_ok =
      std::fabs(v.v_a - 4.315) <= 1e-12 && std::fabs(v.paco2 - 40.0) <= 1e-6;
  const bool convex_ok =
      std::fabs(saha::convex_update(0.90, 0.94, 0.5) - 0.92) <= 1e-12;
  const bool lambda_ok =
      std::fabs(saha::fit_lambda({0.9}, {1.0}, {0.95}) - 0.5) <= 1e-12;
  std::printf(
      "  hill(26.6) = %.17g, alpha = %.12g, PaCO2(4.315 L/min) = %.9g\n",
      twin::hill_saturation(26.6, c), c.ewma_alpha(), v.paco2);
  report(4, hill_exact && alpha_ok && paco2_ok && convex_ok && lambda_ok,
         "closed-form values for the Hill curve, EWMA, PaCO2, blend math");
  CHECK(hill_exact);
  CHECK(alpha_ok);
  CHECK(paco2_ok);
  CHECK(convex_ok);
  CHECK(lambda_ok);
}

namespace {

struct OracleStump {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double sse = 0.0;
};

OracleStump oracle_stump(const Matrix& x, const std::vector<double>& y) {
  OracleStump best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> values;
    for (std::size_t r = 0; r < x.rows; ++r) values.push_back(x.at(r, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double thr = values[k] + 0.5 * (values[k + 1] - values[k]);
      if (thr >= values[k + 1]) thr = values[k];
      double ls = 0.0, rs = 0.0;
      int ln = 0, rn = 0;
      for (std::size_t r = 0; r < x.rows; ++r) {
        if (x.at(r, f) <= thr) {
          ls += y[r];
          ++ln;
        } else {
          rs += y[r];
          ++rn;
        }
      }
      if (ln < 1 || rn < 1) continue;
      const double lm = ls / ln, rm = rs / rn;
      double sse = 0.0;
      for (std::size_t r = 0; r < x.rows; ++r) {
        const double mu = x.at(r, f) <= thr ? lm : rm;
        sse += (y[r] - mu) * (y[r] - mu);
      }
      if (!best.found || sse < best.sse)
        best = {true, static_cast<int>(f), thr, sse};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("criterion 5: boosted-tree oracle equivalence") {
  Rng rng(0xACCE55);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const std::size_t f = 1 + rng.below(3);
    Matrix x(n, f);
    for (double& v : x.values) v = rng.uniform();
    std::vector<double> y(n);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);

    gbdt::GbdtHyperparams hp;
    hp.n_estimators = 1;
    hp.max_depth = 1;
    hp.min_samples_leaf = 1;
    hp.subsample = 1.0;
    const auto model = gbdt::fit(x, y, hp);
    const OracleStump oracle = oracle_stump(x, y);
    const gbdt::TreeNode& root = model.nodes[0];
    if (oracle.found) {
      if (root.feature != oracle.feature || root.threshold != oracle.threshold)
        ++mismatches;
    } else if (root.feature != -1) {
      ++mismatches;
    }
  }

  std::size_t non_monotone = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(40);
    Matrix x(n, 4);
    for (double& v : x.values) v = rng.uniform();
    std::vector<double> y(n);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);
    gbdt::GbdtHyperparams hp;
    hp.n_estimators = 25;
    hp.learning_rate = 0.3;
    hp.subsample = 1.0;
    hp.min_samples_leaf = 2;
    const auto model = gbdt::fit(x, y, hp);
    const auto stages = model.staged_predict(x);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& stage : stages) {
      double mse = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        mse += (stage[r] - y[r]) * (stage[r] - y[r]);
      mse /= static_cast<double>(n);
      if (mse > prev + 1e-12) ++non_monotone;
      prev = mse;
    }
  }

  std::printf("  stump mismatches: %zu / 200; non-monotone stages: %zu\n",
              mismatches, non_monotone);
  report(5, mismatches == 0 && non_monotone == 0,
         "exhaustive stump oracle and monotone training error");
  CHECK(mismatches == 0);
  CHECK(non_monotone == 0);
}

TEST_CASE("criterion 6: structure-search sanity") {
  int hits = 0;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    structopt::PsoConfig cfg;
    cfg.seed = seed;
    const structopt::PsoResult r = structopt::pso_optimize(
        [](const saha::NetworkStructure& s) {
          return static_cast<double>(s.active_mask_bits() + s.active_links());
        },
        cfg);
    for (std::size_t i = 1; i < r.history.size(); ++i)
      if (r.history[i] > r.history[i - 1]) monotone = false;
    if (r.best_fitness == 3.0) ++hits;
  }

  // L0 linearity of the fitness composition
  saha::NetworkStructure s = saha::prior_structure();
  structopt::FitnessConfig dyadic;
  dyadic.lambda_mask = 0.0001220703125;  // 2^-13: exact in binary
  dyadic.lambda_link = 0.000244140625;   // 2^-12
  saha::NetworkStructure s_bit = s;
  s_bit.masks[0][9] = 1;
  saha::NetworkStructure s_link = s;
  s_link.links[0][1] = 1;
  const bool mask_linear =
      structopt::penalized_fitness(0.25, s_bit, dyadic) -
          structopt::penalized_fitness(0.25, s, dyadic) ==
      dyadic.lambda_mask;
  const bool link_linear =
      structopt::penalized_fitness(0.25, s_link, dyadic) -
          structopt::penalized_fitness(0.25, s, dyadic) ==
      dyadic.lambda_link;
  structopt::FitnessConfig ref_cfg;
  ref_cfg.lambda_mask = 1e-4;
  ref_cfg.lambda_link = 1e-4;
  saha::NetworkStructure ex;
  for (auto& m : ex.masks) m.fill(0);
  for (int f = 0; f < 4; ++f) ex.masks[0][f] = 1;
  for (int f = 0; f < 3; ++f) ex.masks[1][f] = 1;
  for (int f = 0; f < 3; ++f) ex.masks[2][f] = 1;
  ex.links[0][1] = 1;
  ex.links[1][2] = 1;
  const bool example_ok =
      std::fabs(structopt::penalized_fitness(0.001, ex, ref_cfg) - 0.0022) <=
      1e-15;

  std::printf("  toy-objective convergence: %d / 20; monotone: %s\n", hits,
              monotone ? "yes" : "no");
  report(6, hits >= 18 && monotone && mask_linear && link_linear && example_ok,
         "swarm reaches the minimal repaired structure; fitness is L0-linear");
  CHECK(hits >= 18);
  CHECK(monotone);
  CHECK(mask_linear);
  CHECK(link_linear);
  CHECK(example_ok);
}

TEST_CASE("criterion 7: mask and link soundness") {
  twin::ScenarioConfig scfg;
  scfg.n_minutes = 200;
  scfg.t_star = 100;
  const twin::TwinTrace tr = twin::simulate(twin::generate_scenario(scfg, 12));
  const auto w = features::build_window(tr, 1, 120);
  const auto hp = saha::default_saha_hyperparams();

  Rng rng(0x50F7);
  std::size_t trials = 0, changed = 0;
  for (int net_idx = 0; net_idx < 5; ++net_idx) {
    // a random valid structure per network
    structopt::Position pos;
    for (double& v : pos) v = rng.uniform();
    Rng repair(net_idx + 1);
    const saha::NetworkStructure s = structopt::threshold_position(pos, repair);
    const saha::TrainedSahaNet net = saha::fit_full(s, w, hp, 1000 + net_idx);
    const auto baseline = saha::predict_full(net, w);

    for (int trial = 0; trial < 100; ++trial, ++trials) {
      features::SupervisedWindow mutated = w;
      for (int agent = 0; agent < saha::kNumAgents; ++agent) {
        // perturb columns this agent cannot see; verify its output directly
        for (int f = 0; f < features::kFeatureCount; ++f) {
          if (s.masks[agent][static_cast<std::size_t>(f)]) continue;
          for (std::size_t r = 0; r < w.size(); ++r)
            if (rng.uniform() < 0.3)
              mutated.x.at(r, static_cast<std::size_t>(f)) =
                  rng.uniform(-10.0, 10.0);
        }
        const auto z = select_columns(mutated.x, net.agent_columns[agent]);
        const auto z0 = select_columns(w.x, net.agent_columns[agent]);
        if (net.agent_models[agent].predict(z) !=
            net.agent_models[agent].predict(z0))
          ++changed;
        mutated = w;  // reset for the next agent
      }
    }
    (void)baseline;
  }

  // C = 0 collapse: updates equal privates exactly, end to end
  const saha::TrainedSahaNet no_links =
      saha::fit_full(saha::prior_structure(), w, hp, 77);
  bool collapse_exact = true;
  for (double l : no_links.lambdas) collapse_exact = collapse_exact && l == 0.0;
  const saha::PrivateForecasts pf =
      saha::private_forecasts(saha::prior_structure(), w, hp.agent, 77);
  Matrix sup_x(w.size(), 3);
  for (std::size_t r = 0; r < w.size(); ++r)
    for (int i = 0; i < 3; ++i)
      sup_x.at(r, static_cast<std::size_t>(i)) = pf.forecasts[i][r];
  collapse_exact = collapse_exact &&
                   saha::predict_full(no_links, w) ==
                       no_links.supervisor_model.predict(sup_x);

  std::printf("  perturbation trials: %zu, outputs changed: %zu\n", trials,
              changed);
  report(7, changed == 0 && trials >= 500 && collapse_exact,
         "masked-out columns are inert; no-link networks collapse exactly");
  CHECK(changed == 0);
  CHECK(trials >= 500);
  CHECK(collapse_exact);
}

TEST_CASE("criterion 8: experiment determinism") {
  const SweepSummary& first = default_sweep();
  const harness::ExperimentResult second =
      harness::run_experiment(default_config());
  const std::string csv1 = harness::metrics_to_csv(first.result.rows);
  const std::string csv2 = harness::metrics_to_csv(second.rows);
  const bool identical = csv1 == csv2;
  std::printf("  metrics CSV bytes: %zu vs %zu, identical: %s\n", csv1.size(),
              csv2.size(), identical ? "yes" : "no");
  report(8, identical, "two full runs produce byte-identical metrics CSVs");
  CHECK(identical);
}
