#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace neid::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Writes a static SVG line chart (fixed 720x440 canvas, one polyline per
/// series, min/max axis labels, top-right legend). Non-finite points are
/// dropped.
void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<Series>& series);

}  // namespace neid::plot
