#pragma once

#include <string>
#include <vector>

namespace dsca {

// Minimal hand-emitted SVG charts for the diagnostics bundle. No styling
// knobs beyond what the figures need.
struct SvgSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_chart(const std::string& title, const std::vector<SvgSeries>& series,
                           bool log_y = false);

std::string svg_bar_chart(const std::string& title, const std::vector<double>& bin_edges,
                          const std::vector<double>& heights);

} // namespace dsca
