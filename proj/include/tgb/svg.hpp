#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tgb {

// Minimal diff-friendly SVG line chart.
struct LinePlot {
  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
  };
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string render_svg(const LinePlot& plot, int width = 640, int height = 420);
void write_svg(const LinePlot& plot, const std::string& path);

}  // namespace tgb
