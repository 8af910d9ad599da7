#pragma once

// Minimal SVG rendering of the figure-data tables.

#include <string>
#include <vector>

namespace grokscale::figures {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;     // polyline through the points
  bool markers = true;  // circles at the points
};

struct Chart {
  std::string stem;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string render_svg(const Chart& chart);

struct Heatmap {
  std::string stem;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<std::string> y_ticks;
  std::vector<std::vector<int>> category;  // [row = y][col = x], -1 for empty
  std::vector<std::string> legend;         // one name per category index
};

std::string render_heatmap_svg(const Heatmap& map);

}  // namespace grokscale::figures
