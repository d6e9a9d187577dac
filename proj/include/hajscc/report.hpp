#pragma once

#include <string>
#include <vector>

namespace hajscc {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label = "test SNR (dB)";
  std::string y_label;
  std::vector<ChartSeries> series;
};

/// Standalone SVG line chart: one polyline with markers per series, ticked
/// axes and a legend. Empty series are skipped.
std::string render_svg(const ChartSpec& chart);

}  // namespace hajscc
