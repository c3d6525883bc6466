/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Minimal line-chart writer. Output depends only on the input values, so
// repeated runs produce identical files.

#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "csfp/csv.hpp"

namespace csfp::svg {

struct Series {
  std::string label;
  std::string colour;
  std::vector<double> y;
};

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// Each series is scaled to its own [min,max] so curves with different units
// share one panel; the legend carries the ranges.
inline std::string line_chart(const std::string& title, const std::string& x_label,
                              const std::vector<double>& x, const std::vector<Series>& series) {
  const double w = 640, h = 400, left = 60, right = 200, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double xmin = x.empty() ? 0.0 : *std::min_element(x.begin(), x.end());
  double xmax = x.empty() ? 1.0 : *std::max_element(x.begin(), x.end());
  if (xmax == xmin) xmax = xmin + 1.0;
  auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(w) +
                    "\" height=\"" + fixed(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed(left) + "\" y=\"24\" font-size=\"14\">" + escape(title) + "</text>\n";
  out += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) +
         "\" height=\"" + fixed(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double v : x) {
    out += "<text x=\"" + fixed(px(v)) + "\" y=\"" + fixed(top + ph + 16) +
           "\" text-anchor=\"middle\">" + format_double(v) + "</text>\n";
  }
  out += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(h - 10) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";

  double legend_y = top + 10;
  for (const Series& s : series) {
    if (s.y.empty()) continue;
    double lo = *std::min_element(s.y.begin(), s.y.end());
    double hi = *std::max_element(s.y.begin(), s.y.end());
    const double span = hi > lo ? hi - lo : 1.0;
    std::string pts;
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i) {
      const double py = top + ph - (s.y[i] - lo) / span * ph;
      if (!pts.empty()) pts += ' ';
      pts += fixed(px(x[i])) + "," + fixed(py);
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.colour + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
    out += "<text x=\"" + fixed(left + pw + 10) + "\" y=\"" + fixed(legend_y) + "\" fill=\"" +
           s.colour + "\">" + escape(s.label) + "</text>\n";
    out += "<text x=\"" + fixed(left + pw + 10) + "\" y=\"" + fixed(legend_y + 14) +
           "\" fill=\"#666\">[" + format_double(lo) + ", " + format_double(hi) + "]</text>\n";
    legend_y += 36;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace csfp::svg
