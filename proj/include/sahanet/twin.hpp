#pragma once

/**
 * @file twin.hpp
 * @brief Digital twin of pulmonary gas exchange.
 *
 * Generates minute-resolution synthetic episodes in which the lung
 * physiology undergoes a sigmoidal regime shift toward an ARDS-like state:
 * compliance falls, alveolar dead space and shunt rise, the A-a gradient
 * worsens, and PEEP/proning partially mitigate. The observed saturation is
 * a low-pass filtered, noise-corrupted version of the true saturation.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sahanet/rng.hpp"

namespace sahanet::twin {

/// Physiological constants and observation-model parameters.
struct TwinConstants {
  double p_b = 760.0;      ///< barometric pressure, mmHg
  double p_h2o = 47.0;     ///< water vapor pressure, mmHg
  double rq = 0.8;         ///< respiratory quotient
  double vco2 = 200.0;     ///< CO2 production, mL/min
  double svo2 = 0.70;      ///< mixed venous saturation, fraction
  double p50 = 26.6;       ///< Hill curve midpoint, mmHg
  double hill_n = 2.7;     ///< Hill exponent
  double pbw = 70.0;       ///< predicted body weight, kg
  double vd_anat = 154.0;  ///< anatomic dead space (2.2 mL/kg), mL
  double k_rr = 0.002;     ///< auto-PEEP sensitivity to tachypnea
  double k_cl = 0.004;     ///< auto-PEEP sensitivity to low compliance
  double tau_sens = 10.0;  ///< sensor time constant, seconds
  double sigma_obs = 0.01; ///< sensor noise, saturation fraction
  double dt = 60.0;        ///< seconds per step

  // Disturbance scales for the A-a gradient and shunt equations.
  double sigma_aa = 1.5;     ///< mmHg
  double sigma_shunt = 0.01; ///< fraction

  /// EWMA smoothing factor of the oximeter model.
  double ewma_alpha() const { return std::exp(-dt / tau_sens); }

  void validate() const {
    if (p_b <= 0.0 || p_h2o <= 0.0 || p50 <= 0.0)
      throw std::invalid_argument("twin: pressures must be positive");
    if (!(svo2 > 0.0 && svo2 < 1.0))
      throw std::invalid_argument("twin: SvO2 must lie in (0,1)");
    if (hill_n <= 0.0)
      throw std::invalid_argument("twin: Hill exponent must be positive");
    if (vd_anat < 0.0 || tau_sens <= 0.0 || dt <= 0.0 || rq <= 0.0)
      throw std::invalid_argument("twin: invalid constant");
    if (sigma_obs < 0.0 || sigma_aa < 0.0 || sigma_shunt < 0.0)
      throw std::invalid_argument("twin: noise scales must be nonnegative");
  }
};

/// Knobs for the synthetic clinical course. Settings are piecewise constant
/// and reviewed every `titration_period` minutes against the observed SpO2.
struct ScenarioConfig {
  int n_minutes = 720;
  int t_star = 360;          ///< transition midpoint, minutes
  double tau_g_min = 12.0;   ///< transition time-constant range, minutes
  double tau_g_max = 20.0;

  double fio2_init = 0.26;
  double peep_init = 5.0;
  double fio2_min = 0.21;        ///< absolute FiO2 floor
  double fio2_support_min = 0.26; ///< maintenance floor the weaning stops at
  double fio2_max = 1.0;
  double peep_min = 5.0;
  double peep_max = 18.0;
  double fio2_step = 0.05;
  double peep_step = 1.0;
  int titration_period = 10;
  double spo2_low = 0.90;   ///< below: raise FiO2 and PEEP
  double spo2_wean = 0.91;  ///< above: wean FiO2 and PEEP back down

  // Oxygenation challenges: occasional one-block FiO2 reductions below the
  // maintenance level (down-titration trials), with a variable depth. Only a
  // stable patient is challenged.
  double challenge_probability = 0.25;
  double challenge_depth_min = 0.02;
  double challenge_depth_max = 0.07;
  double challenge_min_spo2 = 0.93;

  double vt_per_kg = 6.0;    ///< tidal volume target, mL/kg PBW
  double vt_jitter_sd = 20.0;
  double rr_base = 14.0;     ///< respiratory rate rises from base toward
  double rr_span = 14.0;     ///< base+span as the regime progresses
  double rr_jitter_sd = 0.8;

  double prone_probability = 0.5;
  int prone_delay_min = 60;  ///< minutes after t_star
  int prone_delay_max = 120;

  double cl_pre = 50.0;      ///< compliance drifts from pre toward post
  double cl_post = 25.0;
  double cl_noise_sd = 1.0;
  double cl_min = 15.0;
  double cl_max = 60.0;

  void validate() const {
    if (n_minutes < 2) throw std::invalid_argument("scenario: n_minutes < 2");
    if (t_star < 1 || t_star >= n_minutes)
      throw std::invalid_argument("scenario: t_star outside episode");
    if (!(tau_g_min >= 12.0 && tau_g_max <= 20.0 && tau_g_min <= tau_g_max))
      throw std::invalid_argument("scenario: tau_g range must lie in [12,20]");
    if (!(fio2_init >= fio2_min && fio2_init <= fio2_max))
      throw std::invalid_argument("scenario: FiO2 init outside range");
    if (!(fio2_support_min >= fio2_min && fio2_support_min <= fio2_max))
      throw std::invalid_argument("scenario: FiO2 support floor outside range");
    if (peep_min < 0.0 || peep_max > 24.0 || peep_min > peep_max ||
        peep_init < peep_min || peep_init > peep_max)
      throw std::invalid_argument("scenario: PEEP range invalid");
    if (!(spo2_low < spo2_wean))
      throw std::invalid_argument("scenario: titration band inverted");
    if (!(challenge_probability >= 0.0 && challenge_probability <= 1.0) ||
        challenge_depth_min < 0.0 || challenge_depth_min > challenge_depth_max)
      throw std::invalid_argument("scenario: challenge settings invalid");
    if (titration_period < 1)
      throw std::invalid_argument("scenario: titration period < 1");
    if (prone_delay_min > prone_delay_max || prone_delay_min < 0)
      throw std::invalid_argument("scenario: prone delay range invalid");
    if (vt_per_kg <= 0.0 || cl_min <= 0.0 || cl_min > cl_max)
      throw std::invalid_argument("scenario: volume/compliance range invalid");
  }
};

/// Fixed per-minute input trajectories plus the episode's transition shape.
struct Scenario {
  int n_minutes = 0;
  int t_star = 0;
  double tau_g = 15.0;
  std::uint64_t rng_seed = 0;

  std::vector<double> fio2;   ///< inspired oxygen fraction
  std::vector<double> peep;   ///< cmH2O
  std::vector<double> vt;     ///< tidal volume, mL
  std::vector<double> rr;     ///< breaths/min
  std::vector<double> prone;  ///< 0 or 1
  std::vector<double> cl;     ///< compliance, mL/cmH2O

  void validate() const {
    if (n_minutes < 1) throw std::invalid_argument("scenario: empty episode");
    if (!(tau_g >= 12.0 && tau_g <= 20.0))
      throw std::invalid_argument("scenario: tau_g outside [12,20]");
    const std::size_t n = static_cast<std::size_t>(n_minutes);
    if (fio2.size() != n || peep.size() != n || vt.size() != n ||
        rr.size() != n || prone.size() != n || cl.size() != n)
      throw std::invalid_argument("scenario: trajectory length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(fio2[i] >= 0.21 && fio2[i] <= 1.0))
        throw std::invalid_argument("scenario: FiO2 outside [0.21,1]");
      if (!(peep[i] >= 0.0 && peep[i] <= 24.0))
        throw std::invalid_argument("scenario: PEEP outside [0,24]");
      if (!(vt[i] > 0.0)) throw std::invalid_argument("scenario: VT <= 0");
      if (!(rr[i] > 0.0)) throw std::invalid_argument("scenario: RR <= 0");
      if (prone[i] != 0.0 && prone[i] != 1.0)
        throw std::invalid_argument("scenario: Prone not binary");
      if (!(cl[i] > 0.0)) throw std::invalid_argument("scenario: CL <= 0");
    }
  }
};

/// Full per-minute record of an episode: inputs, hidden physiology, and the
/// true and observed saturation. Immutable after construction.
struct TwinTrace {
  int n_minutes = 0;
  int t_star = 0;
  double tau_g = 0.0;
  std::uint64_t rng_seed = 0;

  // Inputs (echoed from the scenario).
  std::vector<double> fio2, peep, vt, rr, prone, cl;

  // Hidden and semi-hidden physiology.
  std::vector<double> g, phi_auto, vt_eff, vt_alv, f_ds, v_a, paco2, p_a_o2,
      aa, p_a_o2_cap, shunt, s_a_o2_cap;

  std::vector<double> spo2_true, spo2_obs;
};

// ---------------------------------------------------------------------------
// Elementary relations
// ---------------------------------------------------------------------------

/// Restrict x to [lo, hi]. Throws if the bounds are inverted.
inline double clip(double x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clip: invalid bounds (lo > hi)");
  return std::min(std::max(x, lo), hi);
}

/// Logistic regime variable centered at t_star; strictly increasing in t.
inline double regime(double t, double t_star, double tau_g) {
  if (!(tau_g > 0.0)) throw std::invalid_argument("regime: tau_g must be > 0");
  return 1.0 / (1.0 + std::exp(-(t - t_star) / tau_g));
}

/// Auto-PEEP fraction grows with tachypnea and low compliance.
inline double auto_peep_fraction(double rr, double cl, const TwinConstants& c) {
  return clip(c.k_rr * (rr - 14.0) + c.k_cl * (35.0 - cl), 0.0, 0.08);
}

/// Alveolar dead-space fraction rises with the regime, mildly improved by PEEP.
inline double deadspace_fraction(double g, double peep) {
  return clip(0.10 * (1.0 - g) + 0.25 * g - 0.005 * g * (peep - 5.0), 0.05,
              0.35);
}

struct TidalVolumes {
  double effective;  ///< mL
  double alveolar;   ///< mL, floored at 5
};

inline TidalVolumes tidal_volumes(double vt, double phi_auto, double f_ds,
                                  const TwinConstants& c) {
  const double eff = vt * (1.0 - phi_auto);
  const double alv = std::max(eff - c.vd_anat - f_ds * eff, 5.0);
  return {eff, alv};
}

struct Ventilation {
  double v_a;    ///< alveolar ventilation, L/min
  double paco2;  ///< arterial CO2, mmHg
};

/// Alveolar ventilation and the CO2 it clears. VCO2 enters in L/min so that
/// nominal ventilation yields PaCO2 near 40 mmHg rather than pinning at the
/// clip rail.
inline Ventilation ventilation_and_paco2(double vt_alv, double rr,
                                         const TwinConstants& c) {
  const double v_a = vt_alv * rr / 1000.0;
  const double paco2 =
      clip(863.0 * (c.vco2 / 1000.0) / std::max(v_a, 0.5), 25.0, 80.0);
  return {v_a, paco2};
}

/// Alveolar gas equation.
inline double alveolar_po2(double fio2, double paco2, const TwinConstants& c) {
  return fio2 * (c.p_b - c.p_h2o) - paco2 / c.rq;
}

/// A-a gradient worsens with the regime, mitigated by PEEP and proning.
inline double aa_gradient(double g, double peep, double prone, double eps_aa) {
  return clip(10.0 * (1.0 - g) + 45.0 * g - 2.0 * g * (peep - 5.0) -
                  4.0 * g * prone + eps_aa,
              5.0, 80.0);
}

/// Shunt fraction rises with the regime, mitigated by PEEP and proning.
inline double shunt_fraction(double g, double peep, double prone,
                             double eps_s) {
  return clip(0.05 * (1.0 - g) + 0.32 * g - 0.015 * g * (peep - 5.0) -
                  0.06 * g * prone + eps_s,
              0.02, 0.45);
}

/// Oxygen-hemoglobin dissociation (Hill curve); strictly increasing in PaO2.
inline double hill_saturation(double pao2, const TwinConstants& c) {
  if (!(pao2 > 0.0))
    throw std::invalid_argument("hill_saturation: PaO2 must be > 0");
  const double pn = std::pow(pao2, c.hill_n);
  return pn / (pn + std::pow(c.p50, c.hill_n));
}

/// Venous admixture: shunted blood bypasses gas exchange.
inline double arterial_saturation(double shunt, double s_cap,
                                  const TwinConstants& c) {
  return clip((1.0 - shunt) * s_cap + shunt * c.svo2, 0.5, 1.0);
}

/// Oximeter model applied to a saturation series: EWMA inertia (seeded with
/// the first sample) plus additive Gaussian noise, clipped to [0.5, 1].
inline std::vector<double> observe(const std::vector<double>& s_true,
                                   const TwinConstants& c, Rng& rng) {
  if (s_true.empty())
    throw std::invalid_argument("observe: empty saturation series");
  const double alpha = c.ewma_alpha();
  std::vector<double> out(s_true.size());
  double smooth = s_true.front();
  for (std::size_t i = 0; i < s_true.size(); ++i) {
    if (i > 0) smooth = alpha * smooth + (1.0 - alpha) * s_true[i];
    out[i] = clip(smooth + c.sigma_obs * rng.normal(0.0, 1.0), 0.5, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episode generation
// ---------------------------------------------------------------------------

namespace detail {

// Sub-stream tags under the scenario seed.
inline constexpr std::uint64_t kNoiseStream = 1;   // eps_Aa, eps_s, eps_obs
inline constexpr std::uint64_t kCourseStream = 2;  // clinical course draws

struct MinuteRecord {
  double g, phi_auto, vt_eff, vt_alv, f_ds, v_a, paco2, p_a_o2, aa,
      p_a_o2_cap, shunt, s_a_o2_cap, spo2_true, smooth, spo2_obs;
};

/// One minute of the physiology chain. Consumes exactly three normal draws
/// (eps_Aa, eps_s, eps_obs) from `noise`, in that order.
inline MinuteRecord step_minute(int t, double fio2, double peep, double vt,
                                double rr, double prone, double cl, int t_star,
                                double tau_g, double smooth_prev,
                                const TwinConstants& c, Rng& noise) {
  MinuteRecord m{};
  m.g = regime(t, t_star, tau_g);
  m.phi_auto = auto_peep_fraction(rr, cl, c);
  m.f_ds = deadspace_fraction(m.g, peep);
  const TidalVolumes tv = tidal_volumes(vt, m.phi_auto, m.f_ds, c);
  m.vt_eff = tv.effective;
  m.vt_alv = tv.alveolar;
  const Ventilation vent = ventilation_and_paco2(m.vt_alv, rr, c);
  m.v_a = vent.v_a;
  m.paco2 = vent.paco2;
  m.p_a_o2 = alveolar_po2(fio2, m.paco2, c);
  const double eps_aa = c.sigma_aa * noise.normal(0.0, 1.0);
  m.aa = aa_gradient(m.g, peep, prone, eps_aa);
  m.p_a_o2_cap = clip(m.p_a_o2 - m.aa, 30.0, 600.0);
  const double eps_s = c.sigma_shunt * noise.normal(0.0, 1.0);
  m.shunt = shunt_fraction(m.g, peep, prone, eps_s);
  m.s_a_o2_cap = hill_saturation(m.p_a_o2_cap, c);
  m.spo2_true = arterial_saturation(m.shunt, m.s_a_o2_cap, c);
  m.smooth = (t == 1) ? m.spo2_true
                      : c.ewma_alpha() * smooth_prev +
                            (1.0 - c.ewma_alpha()) * m.spo2_true;
  m.spo2_obs = clip(m.smooth + c.sigma_obs * noise.normal(0.0, 1.0), 0.5, 1.0);
  return m;
}

}  // namespace detail

/// Generates a clinician-like episode: piecewise-constant ventilator
/// settings reviewed every `titration_period` minutes against the observed
/// saturation, a single optional proning event after the transition, and
/// compliance declining with the regime. Deterministic given (config, seed).
inline Scenario generate_scenario(const ScenarioConfig& cfg,
                                  std::uint64_t seed,
                                  const TwinConstants& c = TwinConstants{}) {
  cfg.validate();
  c.validate();

  Scenario sc;
  sc.n_minutes = cfg.n_minutes;
  sc.t_star = cfg.t_star;
  sc.rng_seed = seed;
  const std::size_t n = static_cast<std::size_t>(cfg.n_minutes);
  sc.fio2.resize(n);
  sc.peep.resize(n);
  sc.vt.resize(n);
  sc.rr.resize(n);
  sc.prone.resize(n);
  sc.cl.resize(n);

  Rng course(derive_seed(seed, detail::kCourseStream));
  // Runs the same physiology the simulator replays, so the titration loop
  // reacts to the exact SpO2_obs the final trace will contain.
  Rng noise(derive_seed(seed, detail::kNoiseStream));

  sc.tau_g = course.uniform(cfg.tau_g_min, cfg.tau_g_max);
  const bool prone_happens = course.uniform() < cfg.prone_probability;
  const int prone_minute =
      cfg.t_star + cfg.prone_delay_min +
      static_cast<int>(course.below(static_cast<std::uint64_t>(
          cfg.prone_delay_max - cfg.prone_delay_min + 1)));

  double fio2_base = cfg.fio2_init;  // maintenance level held by titration
  double fio2 = fio2_base;
  double peep = cfg.peep_init;
  double vt = 0.0, rr = 0.0;
  double smooth = 0.0;
  double prev_obs = 1.0;

  for (int t = 1; t <= cfg.n_minutes; ++t) {
    const double g = regime(t, cfg.t_star, sc.tau_g);
    if (t == 1 || (t - 1) % cfg.titration_period == 0) {
      if (t > 1) {
        if (prev_obs < cfg.spo2_low) {
          fio2_base = std::min(fio2_base + cfg.fio2_step, cfg.fio2_max);
          peep = std::min(peep + cfg.peep_step, cfg.peep_max);
        } else if (prev_obs > cfg.spo2_wean) {
          fio2_base = std::max(fio2_base - cfg.fio2_step, cfg.fio2_support_min);
          peep = std::max(peep - cfg.peep_step, cfg.peep_min);
        }
      }
      const bool challenge = course.uniform() < cfg.challenge_probability &&
                             (t == 1 || prev_obs >= cfg.challenge_min_spo2);
      const double depth =
          course.uniform(cfg.challenge_depth_min, cfg.challenge_depth_max);
      fio2 = challenge ? std::max(fio2_base - depth, cfg.fio2_min) : fio2_base;
      vt = std::max(cfg.vt_per_kg * c.pbw +
                        course.normal(0.0, cfg.vt_jitter_sd),
                    200.0);
      rr = clip(cfg.rr_base + cfg.rr_span * g +
                    course.normal(0.0, cfg.rr_jitter_sd),
                10.0, 35.0);
    }
    const double prone = (prone_happens && t >= prone_minute) ? 1.0 : 0.0;
    const double cl = clip(cfg.cl_pre * (1.0 - g) + cfg.cl_post * g +
                               course.normal(0.0, cfg.cl_noise_sd),
                           cfg.cl_min, cfg.cl_max);

    const std::size_t i = static_cast<std::size_t>(t - 1);
    sc.fio2[i] = fio2;
    sc.peep[i] = peep;
    sc.vt[i] = vt;
    sc.rr[i] = rr;
    sc.prone[i] = prone;
    sc.cl[i] = cl;

    const detail::MinuteRecord m = detail::step_minute(
        t, fio2, peep, vt, rr, prone, cl, cfg.t_star, sc.tau_g, smooth, c,
        noise);
    smooth = m.smooth;
    prev_obs = m.spo2_obs;
  }

  sc.validate();
  return sc;
}

/// Replays the physiology chain over a fixed scenario. Deterministic given
/// (scenario, constants); reproduces the closed-loop episode bit-for-bit
/// when the scenario came from generate_scenario with the same constants.
inline TwinTrace simulate(const Scenario& sc,
                          const TwinConstants& c = TwinConstants{}) {
  sc.validate();
  c.validate();

  TwinTrace tr;
  tr.n_minutes = sc.n_minutes;
  tr.t_star = sc.t_star;
  tr.tau_g = sc.tau_g;
  tr.rng_seed = sc.rng_seed;
  tr.fio2 = sc.fio2;
  tr.peep = sc.peep;
  tr.vt = sc.vt;
  tr.rr = sc.rr;
  tr.prone = sc.prone;
  tr.cl = sc.cl;

  const std::size_t n = static_cast<std::size_t>(sc.n_minutes);
  for (auto* col : {&tr.g, &tr.phi_auto, &tr.vt_eff, &tr.vt_alv, &tr.f_ds,
                    &tr.v_a, &tr.paco2, &tr.p_a_o2, &tr.aa, &tr.p_a_o2_cap,
                    &tr.shunt, &tr.s_a_o2_cap, &tr.spo2_true, &tr.spo2_obs})
    col->resize(n);

  Rng noise(derive_seed(sc.rng_seed, detail::kNoiseStream));
  double smooth = 0.0;
  for (int t = 1; t <= sc.n_minutes; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    const detail::MinuteRecord m = detail::step_minute(
        t, sc.fio2[i], sc.peep[i], sc.vt[i], sc.rr[i], sc.prone[i], sc.cl[i],
        sc.t_star, sc.tau_g, smooth, c, noise);
    smooth = m.smooth;
    tr.g[i] = m.g;
    tr.phi_auto[i] = m.phi_auto;
    tr.vt_eff[i] = m.vt_eff;
    tr.vt_alv[i] = m.vt_alv;
    tr.f_ds[i] = m.f_ds;
    tr.v_a[i] = m.v_a;
    tr.paco2[i] = m.paco2;
    tr.p_a_o2[i] = m.p_a_o2;
    tr.aa[i] = m.aa;
    tr.p_a_o2_cap[i] = m.p_a_o2_cap;
    tr.shunt[i] = m.shunt;
    tr.s_a_o2_cap[i] = m.s_a_o2_cap;
    tr.spo2_true[i] = m.spo2_true;
    tr.spo2_obs[i] = m.spo2_obs;
  }
  return tr;
}

}  // namespace sahanet::twin
