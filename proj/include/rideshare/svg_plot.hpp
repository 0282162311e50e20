#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace rideshare {

struct PlotSeries {
  std::string label;
  std::vector<double> values;
  std::string color = "#1f77b4";
  double opacity = 1.0;
  bool dashed = false;
  bool in_legend = true;
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
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

}  // namespace detail

/// Minimal line chart written as standalone SVG; x is the sample index.
inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr double width = 720, height = 420;
  constexpr double left = 70, right = 170, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 1.0, hi += 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto px = [&](double i) { return left + plot_w * (n > 1 ? i / static_cast<double>(n - 1) : 0.5); };
  auto py = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << detail::escape_xml(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
     << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int k = 0; k <= 5; ++k) {
    const double v = lo + (hi - lo) * k / 5.0;
    const double y = py(v);
    os << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << y << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << detail::fmt(v)
       << "</text>\n";
    const double i = (n - 1) * k / 5.0;
    os << "<text x=\"" << px(i) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
       << detail::fmt(std::round(i)) << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
     << detail::escape_xml(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << detail::escape_xml(y_label) << "</text>\n";

  int legend_row = 0;
  for (const auto& s : series) {
    if (s.values.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-opacity=\"" << s.opacity
       << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"6,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i)
      if (std::isfinite(s.values[i])) os << px(static_cast<double>(i)) << ',' << py(s.values[i]) << ' ';
    os << "\"/>\n";
    if (!s.in_legend) continue;
    const double ly = top + 10 + 18 * legend_row++;
    os << "<line x1=\"" << left + plot_w + 10 << "\" x2=\"" << left + plot_w + 34 << "\" y1=\"" << ly
       << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
       << (s.dashed ? " stroke-dasharray=\"6,3\"" : "") << "/>\n";
    os << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << detail::escape_xml(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_svg(const std::string& path, const std::string& svg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << svg;
}

}  // namespace rideshare
