#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/registration.hpp"

namespace affkit {

namespace detail {

inline const char* svg_color(size_t i) {
  static const char* palette[] = {"#2c7fb8", "#d95f02", "#1b9e77", "#e7298a",
                                  "#7570b3", "#66a61e", "#a6761d", "#666666"};
  return palette[i % 8];
}

}  // namespace detail

struct SvgSeries {
  std::string name;
  std::vector<double> values;
};

// Minimal polyline chart: axes, legend, one polyline per series, x = index.
inline void write_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                             const std::string& path) {
  const int w = 640, h = 400, margin = 50;
  double ymin = 0.0, ymax = 1e-9;
  size_t nmax = 1;
  for (const SvgSeries& s : series) {
    nmax = std::max(nmax, s.values.size());
    for (double v : s.values) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (ymax == ymin) ymax = ymin + 1.0;

  auto px = [&](double i) { return margin + i / std::max<double>(1.0, nmax - 1) * (w - 2 * margin); };
  auto py = [&](double v) { return h - margin - (v - ymin) / (ymax - ymin) * (h - 2 * margin); };

  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << margin << "' y1='" << h - margin << "' x2='" << w - margin
      << "' y2='" << h - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << h - margin << "' stroke='black'/>\n";
  out << "<text x='" << margin << "' y='" << h - margin + 20 << "' font-size='11'>0</text>\n";
  out << "<text x='" << w - margin << "' y='" << h - margin + 20
      << "' text-anchor='end' font-size='11'>" << nmax - 1 << "</text>\n";
  out << "<text x='" << margin - 5 << "' y='" << py(ymin)
      << "' text-anchor='end' font-size='11'>" << ymin << "</text>\n";
  out << "<text x='" << margin - 5 << "' y='" << py(ymax) + 10
      << "' text-anchor='end' font-size='11'>" << ymax << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    out << "<polyline fill='none' stroke='" << detail::svg_color(si) << "' points='";
    for (size_t i = 0; i < s.values.size(); ++i)
      out << px(static_cast<double>(i)) << "," << py(s.values[i]) << " ";
    out << "'/>\n";
    out << "<text x='" << w - margin + 5 << "' y='" << margin + 15 * si << "' font-size='11' fill='"
        << detail::svg_color(si) << "'>" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

// Point trajectories of the toy optimization: one trail per point, squares at
// the initial positions, circles at the final ones.
inline void write_toy_svg(const ToyResult& toy, const std::string& title,
                          const std::string& path) {
  if (toy.steps.empty()) throw PreconditionError("write_toy_svg: empty trajectory");
  const int w = 480, h = 480, margin = 30;
  double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
  for (const ToyStep& st : toy.steps)
    for (const auto& side : {&st.s, &st.sdot})
      for (const auto& pt : *side) {
        if (pt.size() < 2) continue;
        xmin = std::min(xmin, pt[0]);
        xmax = std::max(xmax, pt[0]);
        ymin = std::min(ymin, pt[1]);
        ymax = std::max(ymax, pt[1]);
      }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto py = [&](double y) { return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin); };

  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  const size_t n = toy.steps.front().s.size();
  for (size_t i = 0; i < n; ++i) {
    for (int side = 0; side < 2; ++side) {
      out << "<polyline fill='none' stroke='" << detail::svg_color(i)
          << "' stroke-opacity='0.5' points='";
      for (const ToyStep& st : toy.steps) {
        const auto& pt = side == 0 ? st.s[i] : st.sdot[i];
        out << px(pt[0]) << "," << py(pt[1]) << " ";
      }
      out << "'/>\n";
      const auto& first = side == 0 ? toy.steps.front().s[i] : toy.steps.front().sdot[i];
      const auto& last = side == 0 ? toy.steps.back().s[i] : toy.steps.back().sdot[i];
      out << "<rect x='" << px(first[0]) - 3 << "' y='" << py(first[1]) - 3
          << "' width='6' height='6' fill='" << detail::svg_color(i) << "'/>\n";
      out << "<circle cx='" << px(last[0]) << "' cy='" << py(last[1]) << "' r='5' fill='"
          << detail::svg_color(i) << "'/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace affkit
