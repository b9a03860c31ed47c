#pragma once

#include <string>
#include <vector>

namespace opd::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line chart with axes, ticks and a legend.
void write_line_plot_svg(const std::string& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<Series>& series);

}  // namespace opd::harness
