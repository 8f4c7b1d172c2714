#pragma once

#include <string>
#include <vector>

namespace omcrl::io {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // non-finite points are skipped
};

struct ChartText {
  std::string title;
  std::string x_label;
  std::string y_label;
};

// Standalone SVG documents.
std::string line_chart(const std::vector<Series>& series, const ChartText& text);
// groups[g] holds one value per entry of `bars`.
std::string bar_chart(const std::vector<std::string>& groups, const std::vector<std::string>& bars,
                      const std::vector<std::vector<double>>& values, const ChartText& text);

// Trailing moving average over `window` finite points.
std::vector<double> smooth(const std::vector<double>& y, int window);

}  // namespace omcrl::io
