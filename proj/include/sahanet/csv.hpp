#pragma once

/**
 * @file csv.hpp
 * @brief CSV serialization for traces, features, and experiment tables.
 *
 * Numbers are written with 12 significant digits via a fixed printf format,
 * so identical data always serializes to identical bytes.
 */

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahanet/features.hpp"
#include "sahanet/twin.hpp"

namespace sahanet::csv {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "t",    "FiO2",      "PEEP",  "VT",        "RR",
      "Prone", "CL",       "g",     "phi_auto",  "VT_eff",
      "VT_alv", "f_DS",    "V_A",   "PaCO2",     "P_A_O2",
      "Aa",   "P_a_O2_cap", "shunt", "S_a_O2_cap", "SpO2_true",
      "SpO2_obs"};
  return cols;
}

inline std::string trace_to_csv(const twin::TwinTrace& tr) {
  std::string out;
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  for (int t = 1; t <= tr.n_minutes; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    const double row[] = {static_cast<double>(t),
                          tr.fio2[i],
                          tr.peep[i],
                          tr.vt[i],
                          tr.rr[i],
                          tr.prone[i],
                          tr.cl[i],
                          tr.g[i],
                          tr.phi_auto[i],
                          tr.vt_eff[i],
                          tr.vt_alv[i],
                          tr.f_ds[i],
                          tr.v_a[i],
                          tr.paco2[i],
                          tr.p_a_o2[i],
                          tr.aa[i],
                          tr.p_a_o2_cap[i],
                          tr.shunt[i],
                          tr.s_a_o2_cap[i],
                          tr.spo2_true[i],
                          tr.spo2_obs[i]};
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      out += format_number(row[c]);
    }
    out += '\n';
  }
  return out;
}

namespace detail {
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}
}  // namespace detail

/// Parses a trace CSV written by trace_to_csv. Episode metadata that the
/// CSV does not carry (t_star, tau_g, seed) stays at its defaults; callers
/// pass t_star explicitly where needed.
inline twin::TwinTrace trace_from_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("trace csv: empty file");
  const std::vector<std::string> header = detail::split_line(line);
  const auto& cols = trace_columns();
  if (header.size() != cols.size())
    throw std::runtime_error("trace csv: unexpected column count");
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (header[i] != cols[i])
      throw std::runtime_error("trace csv: unexpected column '" + header[i] +
                               "'");

  twin::TwinTrace tr;
  std::vector<std::vector<double>*> dest = {
      nullptr,       &tr.fio2,  &tr.peep,   &tr.vt,        &tr.rr,
      &tr.prone,     &tr.cl,    &tr.g,      &tr.phi_auto,  &tr.vt_eff,
      &tr.vt_alv,    &tr.f_ds,  &tr.v_a,    &tr.paco2,     &tr.p_a_o2,
      &tr.aa,        &tr.p_a_o2_cap, &tr.shunt, &tr.s_a_o2_cap,
      &tr.spo2_true, &tr.spo2_obs};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_line(line);
    if (fields.size() != cols.size())
      throw std::runtime_error("trace csv: malformed row");
    for (std::size_t c = 1; c < fields.size(); ++c)
      dest[c]->push_back(std::stod(fields[c]));
    ++tr.n_minutes;
  }
  if (tr.n_minutes == 0) throw std::runtime_error("trace csv: no rows");
  return tr;
}

inline std::string features_to_csv(const twin::TwinTrace& tr,
                                   const twin::TwinConstants& c) {
  std::string out = "t";
  for (const std::string& name : features::feature_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (int t = 1; t <= tr.n_minutes; ++t) {
    out += format_number(static_cast<double>(t));
    const auto row = features::feature_row(tr, t, c);
    for (double v : row) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace sahanet::csv
