#pragma once

/**
 * @file features.hpp
 * @brief Model-visible feature pipeline.
 *
 * Builds the 13-dimensional input vector and one-step-ahead supervised
 * pairs from a trace. Only observable quantities enter: the six raw
 * settings, three physiology values recomputed from those settings under a
 * pre-transition assumption, and four one-step deltas. Hidden twin state
 * never leaks into a feature.
 */

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahanet/matrix.hpp"
#include "sahanet/twin.hpp"

namespace sahanet::features {

inline constexpr int kFeatureCount = 13;

/// Fixed feature order shared by every model in the project.
enum FeatureIndex : int {
  kFiO2 = 0,
  kPeep = 1,
  kVt = 2,
  kRr = 3,
  kProne = 4,
  kCl = 5,
  kPaco2 = 6,
  kPao2 = 7,
  kVa = 8,
  kDeltaFiO2 = 9,
  kDeltaPeep = 10,
  kDeltaRr = 11,
  kDeltaProne = 12,
};

inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "FiO2",  "PEEP",  "VT",    "RR",    "Prone", "CL",   "PaCO2_feat",
      "P_A_O2_feat", "V_A_feat", "dFiO2", "dPEEP", "dRR",  "dProne"};
  return names;
}

struct DerivedFeatures {
  double paco2;
  double p_a_o2;
  double v_a;
};

/// Recomputes the ventilation chain from observed inputs only, with the
/// hidden regime held at its pre-transition baseline (g = 0). After the
/// transition these estimates become biased; absorbing that drift is the
/// forecasters' job.
inline DerivedFeatures derived_features(double fio2, double peep, double vt,
                                        double rr, double cl,
                                        const twin::TwinConstants& c) {
  const double phi = twin::auto_peep_fraction(rr, cl, c);
  const double f_ds = twin::deadspace_fraction(0.0, peep);
  const twin::TidalVolumes tv = twin::tidal_volumes(vt, phi, f_ds, c);
  const twin::Ventilation vent = twin::ventilation_and_paco2(tv.alveolar, rr, c);
  return {vent.paco2, twin::alveolar_po2(fio2, vent.paco2, c), vent.v_a};
}

/// The 13 features for minute t (1-based). Deltas compare against minute
/// t-1 and are zero at t = 1.
inline std::array<double, kFeatureCount> feature_row(
    const twin::TwinTrace& tr, int t, const twin::TwinConstants& c) {
  if (t < 1 || t > tr.n_minutes)
    throw std::out_of_range("feature_row: minute outside trace");
  const std::size_t i = static_cast<std::size_t>(t - 1);
  std::array<double, kFeatureCount> row{};
  row[kFiO2] = tr.fio2[i];
  row[kPeep] = tr.peep[i];
  row[kVt] = tr.vt[i];
  row[kRr] = tr.rr[i];
  row[kProne] = tr.prone[i];
  row[kCl] = tr.cl[i];
  const DerivedFeatures d =
      derived_features(tr.fio2[i], tr.peep[i], tr.vt[i], tr.rr[i], tr.cl[i], c);
  row[kPaco2] = d.paco2;
  row[kPao2] = d.p_a_o2;
  row[kVa] = d.v_a;
  if (t > 1) {
    row[kDeltaFiO2] = tr.fio2[i] - tr.fio2[i - 1];
    row[kDeltaPeep] = tr.peep[i] - tr.peep[i - 1];
    row[kDeltaRr] = tr.rr[i] - tr.rr[i - 1];
    row[kDeltaProne] = tr.prone[i] - tr.prone[i - 1];
  }
  return row;
}

/// Feature rows over [t_begin, t_end) paired with next-minute observed
/// saturation targets: row r corresponds to minute t_begin + r and its
/// target is SpO2_obs(t_begin + r + 1).
struct SupervisedWindow {
  int t_begin = 0;  ///< first minute, inclusive
  int t_end = 0;    ///< one past the last minute
  Matrix x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

inline SupervisedWindow build_window(const twin::TwinTrace& tr, int t_begin,
                                     int t_end,
                                     const twin::TwinConstants& c =
                                         twin::TwinConstants{}) {
  if (t_begin >= t_end)
    throw std::invalid_argument("build_window: empty minute range");
  if (t_begin < 1 || t_end > tr.n_minutes)
    throw std::out_of_range(
        "build_window: range outside [1, N-1] usable minutes");

  SupervisedWindow w;
  w.t_begin = t_begin;
  w.t_end = t_end;
  const std::size_t rows = static_cast<std::size_t>(t_end - t_begin);
  w.x = Matrix(rows, kFeatureCount);
  w.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = t_begin + static_cast<int>(r);
    const std::array<double, kFeatureCount> row = feature_row(tr, t, c);
    for (int k = 0; k < kFeatureCount; ++k) w.x.at(r, k) = row[k];
    w.y[r] = tr.spo2_obs[static_cast<std::size_t>(t)];  // minute t+1
  }
  return w;
}

}  // namespace sahanet::features
