#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "teesplit/error.hpp"

namespace teesplit {

/// Writes a file by streaming into a sibling temporary and renaming it over
/// the destination, so readers never observe a partial file.
inline void write_file_atomically(const std::filesystem::path& path,
                                  const std::function<void(std::ostream&)>& fill) {
  namespace fs = std::filesystem;
  if (path.has_parent_path() && !fs::exists(path.parent_path()))
    throw LookupError("output directory does not exist: " + path.parent_path().string());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LookupError("cannot write " + tmp.string());
    fill(out);
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("failed writing " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  write_file_atomically(path, [&](std::ostream& os) { os << text; });
}

struct ChartSeries {
  std::string name;
  std::string color;
  std::vector<double> values;  // one per x label; NaN leaves a gap
};

struct LineChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> x_labels;
  std::vector<ChartSeries> series;
  std::optional<double> reference_line;  // horizontal dashed line
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline void render_panel(std::ostream& os, const LineChart& chart, double top, double width, double height) {
  const double left = 70, right = 20, bottom = 60, title_h = 28;
  const double px0 = left, px1 = width - right;
  const double py0 = top + title_h, py1 = top + height - bottom;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : chart.series)
    for (double v : s.values)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (chart.reference_line) lo = std::min(lo, *chart.reference_line), hi = std::max(hi, *chart.reference_line);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const std::size_t n = chart.x_labels.size();
  auto xpos = [&](std::size_t i) {
    return n <= 1 ? (px0 + px1) / 2 : px0 + (px1 - px0) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto ypos = [&](double v) { return py1 - (py1 - py0) * (v - lo) / (hi - lo); };

  os << "<text x=\"" << fmt(width / 2, 1) << "\" y=\"" << fmt(top + 18, 1)
     << "\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(chart.title) << "</text>\n";
  os << "<rect x=\"" << fmt(px0, 1) << "\" y=\"" << fmt(py0, 1) << "\" width=\"" << fmt(px1 - px0, 1)
     << "\" height=\"" << fmt(py1 - py0, 1) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0, y = ypos(v);
    os << "<line x1=\"" << fmt(px0, 1) << "\" y1=\"" << fmt(y, 1) << "\" x2=\"" << fmt(px1, 1) << "\" y2=\""
       << fmt(y, 1) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << fmt(px0 - 6, 1) << "\" y=\"" << fmt(y + 4, 1)
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i)
    os << "<text x=\"" << fmt(xpos(i), 1) << "\" y=\"" << fmt(py1 + 14, 1)
       << "\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-35 " << fmt(xpos(i), 1) << ' '
       << fmt(py1 + 14, 1) << ")\">" << xml_escape(chart.x_labels[i]) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt((py0 + py1) / 2, 1) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt((py0 + py1) / 2, 1) << ")\">" << xml_escape(chart.y_label) << "</text>\n";
  if (chart.reference_line) {
    const double y = ypos(*chart.reference_line);
    os << "<line x1=\"" << fmt(px0, 1) << "\" y1=\"" << fmt(y, 1) << "\" x2=\"" << fmt(px1, 1) << "\" y2=\""
       << fmt(y, 1) << "\" stroke=\"#c00\" stroke-dasharray=\"6 4\"/>\n";
  }
  double legend_x = px0 + 8;
  for (const auto& s : chart.series) {
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < s.values.size() && i < n; ++i) {
      if (!std::isfinite(s.values[i])) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L " : " M ") + fmt(xpos(i), 1) + ' ' + fmt(ypos(s.values[i]), 1);
      pen_down = true;
      os << "<circle cx=\"" << fmt(xpos(i), 1) << "\" cy=\"" << fmt(ypos(s.values[i]), 1) << "\" r=\"3\" fill=\""
         << s.color << "\"/>\n";
    }
    if (!path.empty())
      os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<rect x=\"" << fmt(legend_x, 1) << "\" y=\"" << fmt(py0 + 8, 1) << "\" width=\"12\" height=\"12\" fill=\""
       << s.color << "\"/>\n";
    os << "<text x=\"" << fmt(legend_x + 16, 1) << "\" y=\"" << fmt(py0 + 18, 1) << "\" font-size=\"11\">"
       << xml_escape(s.name) << "</text>\n";
    legend_x += 24 + 7.0 * static_cast<double>(s.name.size());
  }
}

}  // namespace detail

/// Self-contained SVG with the charts stacked vertically.
inline void write_svg(std::ostream& os, const std::vector<LineChart>& charts, double width = 720,
                      double panel_height = 320) {
  const double height = panel_height * static_cast<double>(std::max<std::size_t>(charts.size(), 1));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(width, 0) << "\" height=\""
     << detail::fmt(height, 0) << "\" viewBox=\"0 0 " << detail::fmt(width, 0) << ' ' << detail::fmt(height, 0)
     << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i)
    detail::render_panel(os, charts[i], panel_height * static_cast<double>(i), width, panel_height);
  os << "</svg>\n";
}

}  // namespace teesplit
