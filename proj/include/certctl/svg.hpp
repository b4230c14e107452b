// Copyright 2026 The certctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CERTCTL_SVG_HPP
#define CERTCTL_SVG_HPP

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "certctl/csv.hpp"
#include "certctl/matrix.hpp"

namespace certctl {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool dashed = false;
};

namespace detail {
inline std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}
}  // namespace detail

/// Self-contained line chart. Every figure gets a sibling CSV (suffix
/// .csv) holding exactly the plotted points in long form: series,x,y.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<SvgSeries>& series,
                             double vertical_marker = std::nan("")) {
  const double W = 720, H = 420;
  const double ml = 70, mr = 160, mt = 40, mb = 50;

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("write_line_chart: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";

  // axes and ticks
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    out << "<line x1=\"" << detail::fmt_px(sx(xv)) << "\" y1=\"" << H - mb << "\" x2=\""
        << detail::fmt_px(sx(xv)) << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::fmt_px(sx(xv)) << "\" y=\"" << H - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(std::round(xv * 1000) / 1000)
        << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt_px(sy(yv)) << "\" x2=\"" << ml
        << "\" y2=\"" << detail::fmt_px(sy(yv)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt_px(sy(yv) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(std::round(yv * 1000) / 1000)
        << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";

  if (std::isfinite(vertical_marker) && vertical_marker >= xmin && vertical_marker <= xmax) {
    out << "<line x1=\"" << detail::fmt_px(sx(vertical_marker)) << "\" y1=\"" << mt << "\" x2=\""
        << detail::fmt_px(sx(vertical_marker)) << "\" y2=\"" << H - mb
        << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }

  int li = 0;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
    if (s.dashed) out << " stroke-dasharray=\"7,3\"";
    out << " points=\"";
    for (const auto& [x, y] : s.points)
      out << detail::fmt_px(sx(x)) << "," << detail::fmt_px(sy(y)) << " ";
    out << "\"/>\n";
    const double ly = mt + 18.0 * li;
    out << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << detail::fmt_px(ly) << "\" x2=\""
        << W - mr + 34 << "\" y2=\"" << detail::fmt_px(ly) << "\" stroke=\"" << s.color
        << "\" stroke-width=\"1.6\"" << (s.dashed ? " stroke-dasharray=\"7,3\"" : "") << "/>\n";
    out << "<text x=\"" << W - mr + 40 << "\" y=\"" << detail::fmt_px(ly + 4)
        << "\" font-size=\"11\">" << s.label << "</text>\n";
    ++li;
  }
  out << "</svg>\n";

  CsvWriter csv(path + ".csv");
  csv.row({"series", "x", "y"});
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) csv.row({s.label, format_double(x), format_double(y)});
}

/// Horizontal bar chart with value labels, plus the sibling CSV.
inline void write_bar_chart(const std::string& path, const std::string& title,
                            const std::string& xlabel,
                            const std::vector<std::pair<std::string, double>>& bars) {
  const double W = 680, H = 80.0 + 46.0 * bars.size();
  const double ml = 150, mr = 80, mt = 40, mb = 40;
  double vmax = 0.0;
  for (const auto& [_, v] : bars) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("write_bar_chart: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  const double span = W - ml - mr;
  for (size_t i = 0; i < bars.size(); ++i) {
    const double y = mt + 46.0 * i + 8.0;
    const double w = span * bars[i].second / (1.1 * vmax);
    out << "<rect x=\"" << ml << "\" y=\"" << detail::fmt_px(y) << "\" width=\""
        << detail::fmt_px(w) << "\" height=\"28\" fill=\"#c44440\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt_px(y + 18)
        << "\" text-anchor=\"end\" font-size=\"12\">" << bars[i].first << "</text>\n";
    out << "<text x=\"" << detail::fmt_px(ml + w + 6) << "\" y=\"" << detail::fmt_px(y + 18)
        << "\" font-size=\"11\">" << format_double(std::round(bars[i].second * 10000) / 10000)
        << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  out << "</svg>\n";

  CsvWriter csv(path + ".csv");
  csv.row({"label", "value"});
  for (const auto& [label, value] : bars) csv.row({label, format_double(value)});
}

}  // namespace certctl

#endif  // CERTCTL_SVG_HPP
