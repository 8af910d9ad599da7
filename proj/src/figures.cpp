#include "grokscale/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace grokscale::figures {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#843c39", "#7b4173"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_svg(const Chart& chart) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(chart.title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    o << "<text x=\"" << coord(sx(xv)) << "\" y=\"" << coord(kTop + ph + 16) << "\" text-anchor=\"middle\">"
      << num(xv) << "</text>\n";
    o << "<text x=\"" << coord(kLeft - 6) << "\" y=\"" << coord(sy(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"" << coord(kHeight - 12) << "\" text-anchor=\"middle\">"
    << escape(chart.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << coord(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << coord(kTop + ph / 2) << ")\">" << escape(chart.y_label) << "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* color = kPalette[si % kPaletteSize];
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << coord(sx(s.x[i])) << ',' << coord(sy(s.y[i])) << ' ';
      }
      o << "\"/>\n";
    }
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << "<circle cx=\"" << coord(sx(s.x[i])) << "\" cy=\"" << coord(sy(s.y[i])) << "\" r=\"2.5\" fill=\""
          << color << "\"/>\n";
      }
    }
    const double ly = kTop + 14 + 16 * static_cast<double>(si);
    o << "<line x1=\"" << coord(kLeft + pw + 12) << "\" y1=\"" << coord(ly - 4) << "\" x2=\""
      << coord(kLeft + pw + 30) << "\" y2=\"" << coord(ly - 4) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << coord(kLeft + pw + 36) << "\" y=\"" << coord(ly) << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render_heatmap_svg(const Heatmap& map) {
  const std::size_t cols = map.x_ticks.size(), rows = map.y_ticks.size();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = cols ? pw / static_cast<double>(cols) : pw;
  const double ch = rows ? ph / static_cast<double>(rows) : ph;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(map.title) << "</text>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const int cat = r < map.category.size() && c < map.category[r].size() ? map.category[r][c] : -1;
      const char* color = cat < 0 ? "#eeeeee" : kPalette[static_cast<std::size_t>(cat) % kPaletteSize];
      // Row 0 is drawn at the bottom.
      const double y = kTop + ph - ch * static_cast<double>(r + 1);
      o << "<rect x=\"" << coord(kLeft + cw * static_cast<double>(c)) << "\" y=\"" << coord(y) << "\" width=\""
        << coord(cw) << "\" height=\"" << coord(ch) << "\" fill=\"" << color << "\" stroke=\"white\"/>\n";
    }
    o << "<text x=\"" << coord(kLeft - 6) << "\" y=\"" << coord(kTop + ph - ch * (static_cast<double>(r) + 0.5) + 4)
      << "\" text-anchor=\"end\">" << escape(map.y_ticks[r]) << "</text>\n";
  }
  for (std::size_t c = 0; c < cols; ++c) {
    o << "<text x=\"" << coord(kLeft + cw * (static_cast<double>(c) + 0.5)) << "\" y=\"" << coord(kTop + ph + 16)
      << "\" text-anchor=\"middle\">" << escape(map.x_ticks[c]) << "</text>\n";
  }
  o << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"" << coord(kHeight - 12) << "\" text-anchor=\"middle\">"
    << escape(map.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << coord(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << coord(kTop + ph / 2) << ")\">" << escape(map.y_label) << "</text>\n";
  for (std::size_t i = 0; i < map.legend.size(); ++i) {
    const double ly = kTop + 14 + 16 * static_cast<double>(i);
    o << "<rect x=\"" << coord(kLeft + pw + 12) << "\" y=\"" << coord(ly - 10) << "\" width=\"12\" height=\"12\" fill=\""
      << kPalette[i % kPaletteSize] << "\"/>\n";
    o << "<text x=\"" << coord(kLeft + pw + 30) << "\" y=\"" << coord(ly) << "\">" << escape(map.legend[i])
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace grokscale::figures
