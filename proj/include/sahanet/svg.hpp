#pragma once

/**
 * @file svg.hpp
 * @brief Hand-rolled SVG writer for the adaptation-sweep figure.
 *
 * One panel per adaptation horizon, each showing the observed saturation
 * with both models' one-step forecasts over the test range. Coordinates are
 * rounded to 0.01 px, which pins the byte-level output for a given input.
 */

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace sahanet::svg {

struct Series {
  std::vector<double> t;
  std::vector<double> v;
  std::string color;
  double width = 1.2;
  std::string dash;  ///< empty for solid
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  std::vector<double> vlines;  ///< vertical markers (minutes)
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace detail

/// Lays the panels out on a fixed grid (3 columns) with shared y-limits.
inline std::string render_grid(const std::vector<Panel>& panels,
                               const std::string& figure_title,
                               double t_min, double t_max, double y_min,
                               double y_max) {
  const int columns = 3;
  const int rows = static_cast<int>((panels.size() + columns - 1) / columns);
  const double panel_w = 320.0, panel_h = 220.0;
  const double margin_l = 52.0, margin_r = 14.0, margin_t = 34.0,
               margin_b = 38.0;
  const double gap = 14.0;
  const double total_w =
      columns * (panel_w + gap) - gap + 20.0;
  const double total_h = rows * (panel_h + gap) - gap + 58.0;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::num(total_w) + "\" height=\"" + detail::num(total_h) +
         "\" viewBox=\"0 0 " + detail::num(total_w) + " " +
         detail::num(total_h) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::num(total_w / 2.0) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" +
         detail::escape(figure_title) + "</text>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const int col = static_cast<int>(p) % columns;
    const int row = static_cast<int>(p) / columns;
    const double ox = 10.0 + col * (panel_w + gap);
    const double oy = 34.0 + row * (panel_h + gap);
    const double plot_x = ox + margin_l;
    const double plot_y = oy + margin_t;
    const double plot_w = panel_w - margin_l - margin_r;
    const double plot_h = panel_h - margin_t - margin_b;

    auto sx = [&](double t) {
      return plot_x + (t - t_min) / (t_max - t_min) * plot_w;
    };
    auto sy = [&](double v) {
      return plot_y + (y_max - v) / (y_max - y_min) * plot_h;
    };

    out += "<g class=\"panel\">\n";
    out += "<rect x=\"" + detail::num(plot_x) + "\" y=\"" +
           detail::num(plot_y) + "\" width=\"" + detail::num(plot_w) +
           "\" height=\"" + detail::num(plot_h) +
           "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + detail::num(plot_x + plot_w / 2.0) + "\" y=\"" +
           detail::num(oy + 22.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">" +
           detail::escape(panels[p].title) + "</text>\n";

    // y ticks every 0.1
    for (double v = y_min; v <= y_max + 1e-9; v += 0.1) {
      out += "<line x1=\"" + detail::num(plot_x - 4.0) + "\" y1=\"" +
             detail::num(sy(v)) + "\" x2=\"" + detail::num(plot_x) +
             "\" y2=\"" + detail::num(sy(v)) +
             "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
      out += "<text x=\"" + detail::num(plot_x - 7.0) + "\" y=\"" +
             detail::num(sy(v) + 3.5) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"10\">" +
             detail::num(v) + "</text>\n";
    }
    // x ticks every 120 minutes
    for (double t = t_min; t <= t_max + 1e-9; t += 120.0) {
      out += "<line x1=\"" + detail::num(sx(t)) + "\" y1=\"" +
             detail::num(plot_y + plot_h) + "\" x2=\"" + detail::num(sx(t)) +
             "\" y2=\"" + detail::num(plot_y + plot_h + 4.0) +
             "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
      out += "<text x=\"" + detail::num(sx(t)) + "\" y=\"" +
             detail::num(plot_y + plot_h + 16.0) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"10\">" +
             detail::num(t) + "</text>\n";
    }
    out += "<text x=\"" + detail::num(plot_x + plot_w / 2.0) + "\" y=\"" +
           detail::num(plot_y + plot_h + 30.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">minute</text>\n";

    for (double t : panels[p].vlines) {
      out += "<line x1=\"" + detail::num(sx(t)) + "\" y1=\"" +
             detail::num(plot_y) + "\" x2=\"" + detail::num(sx(t)) +
             "\" y2=\"" + detail::num(plot_y + plot_h) +
             "\" stroke=\"#999999\" stroke-width=\"1\" "
             "stroke-dasharray=\"4,3\"/>\n";
    }

    for (const Series& s : panels[p].series) {
      std::string points;
      for (std::size_t i = 0; i < s.t.size(); ++i) {
        if (s.t[i] < t_min || s.t[i] > t_max) continue;
        if (!points.empty()) points += ' ';
        points += detail::num(sx(s.t[i])) + "," +
                  detail::num(sy(std::min(std::max(s.v[i], y_min), y_max)));
      }
      out += "<polyline fill=\"none\" stroke=\"" + s.color +
             "\" stroke-width=\"" + detail::num(s.width) + "\"";
      if (!s.dash.empty()) out += " stroke-dasharray=\"" + s.dash + "\"";
      out += " points=\"" + points + "\"/>\n";
    }
    out += "</g>\n";
  }

  // Legend, bottom center.
  const double ly = total_h - 12.0;
  const struct {
    const char* label;
    const char* color;
  } legend[] = {{"observed SpO2", "#7f7f7f"},
                {"monolith forecast", "#d62728"},
                {"SAHA-Net forecast", "#1f77b4"}};
  double lx = total_w / 2.0 - 220.0;
  for (const auto& item : legend) {
    out += "<line x1=\"" + detail::num(lx) + "\" y1=\"" + detail::num(ly - 4.0) +
           "\" x2=\"" + detail::num(lx + 22.0) + "\" y2=\"" +
           detail::num(ly - 4.0) + "\" stroke=\"" + item.color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::num(lx + 27.0) + "\" y=\"" +
           detail::num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" +
           std::string(item.label) + "</text>\n";
    lx += 160.0;
  }

  out += "</svg>\n";
  return out;
}

}  // namespace sahanet::svg
