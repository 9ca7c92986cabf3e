#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "io.hpp"

namespace deepntk::svg {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;  // non-finite values break the polyline
};

namespace detail {

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
  return palette[i % 10];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

inline std::string num(double v) { return io::format_fixed(v, 2); }

}  // namespace detail

// fixed-size line chart; purely textual output so identical inputs always
// produce identical bytes
inline void write_line_plot(const std::filesystem::path& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
  constexpr double width = 720, height = 480;
  constexpr double left = 64, right = 696, top = 40, bottom = 432;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool have = false;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.xs.size() && k < s.ys.size(); ++k) {
      if (!std::isfinite(s.xs[k]) || !std::isfinite(s.ys[k])) continue;
      if (!have) {
        x_min = x_max = s.xs[k];
        y_min = y_max = s.ys[k];
        have = true;
      } else {
        x_min = std::min(x_min, s.xs[k]);
        x_max = std::max(x_max, s.xs[k]);
        y_min = std::min(y_min, s.ys[k]);
        y_max = std::max(y_max, s.ys[k]);
      }
    }
  if (x_max - x_min < 1e-12) { x_min -= 1.0; x_max += 1.0; }
  if (y_max - y_min < 1e-12) { y_min -= 1.0; y_max += 1.0; }
  double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y_min) / (y_max - y_min) * (bottom - top); };

  auto out = io::open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << detail::escape(title) << "</text>\n";

  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    double fx = x_min + (x_max - x_min) * t / 4.0;
    double fy = y_min + (y_max - y_min) * t / 4.0;
    out << "<line x1=\"" << detail::num(px(fx)) << "\" y1=\"" << bottom << "\" x2=\"" << detail::num(px(fx))
        << "\" y2=\"" << bottom + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::num(px(fx)) << "\" y=\"" << bottom + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << io::format_fixed(fx, 3)
        << "</text>\n";
    out << "<line x1=\"" << left - 5 << "\" y1=\"" << detail::num(py(fy)) << "\" x2=\"" << left << "\" y2=\""
        << detail::num(py(fy)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << detail::num(py(fy) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << io::format_fixed(fy, 3)
        << "</text>\n";
  }

  out << "<text x=\"380\" y=\"466\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << detail::escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"236\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 236)\">"
      << detail::escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    std::string points;
    auto flush = [&]() {
      if (!points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << detail::color(si) << "\" stroke-width=\"1.5\" points=\""
            << points << "\"/>\n";
        points.clear();
      }
    };
    for (std::size_t k = 0; k < s.xs.size() && k < s.ys.size(); ++k) {
      if (!std::isfinite(s.xs[k]) || !std::isfinite(s.ys[k])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += detail::num(px(s.xs[k])) + "," + detail::num(py(s.ys[k]));
    }
    flush();
  }

  if (series.size() <= 10)
    for (std::size_t si = 0; si < series.size(); ++si)
      out << "<text x=\"" << right - 4 << "\" y=\"" << top + 14 + 16 * static_cast<double>(si)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << detail::color(si)
          << "\">" << detail::escape(series[si].label) << "</text>\n";

  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace deepntk::svg
