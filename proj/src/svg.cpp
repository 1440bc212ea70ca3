#include "dsca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dsca {

namespace {

constexpr double kW = 640, kH = 400;
constexpr double kL = 70, kR = 20, kT = 40, kB = 40;

double safe_log10(double v) { return std::log10(std::max(v, 1e-300)); }

} // namespace

std::string svg_line_chart(const std::string& title, const std::vector<SvgSeries>& series,
                           bool log_y) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const SvgSeries& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      double t = log_y ? safe_log10(v) : v;
      ymin = std::min(ymin, t);
      ymax = std::max(ymax, t);
    }
  }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double y) {
    double t = log_y ? safe_log10(y) : y;
    return kH - kB - (t - ymin) / (ymax - ymin) * (kH - kT - kB);
  };

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='"
     << kH << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='14'>"
     << title << "</text>\n";
  os << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR
     << "' y2='" << kH - kB << "' stroke='black'/>\n";
  os << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='"
     << kH - kB << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    double ty = ymin + (ymax - ymin) * i / 4.0;
    double label = log_y ? std::pow(10.0, ty) : ty;
    os << "<text x='" << kL - 6 << "' y='" << py(log_y ? std::pow(10.0, ty) : ty) + 4
       << "' text-anchor='end' font-size='10'>" << label << "</text>\n";
    double tx = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x='" << px(tx) << "' y='" << kH - kB + 16
       << "' text-anchor='middle' font-size='10'>" << tx << "</text>\n";
  }
  int legend_row = 0;
  for (const SvgSeries& s : series) {
    os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << kW - kR - 150 << "' y='" << kT + 14 * legend_row++
       << "' font-size='11' fill='" << s.color << "'>" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<double>& bin_edges,
                          const std::vector<double>& heights) {
  double hmax = 1e-12;
  for (double h : heights) hmax = std::max(hmax, h);

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='"
     << kH << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='14'>"
     << title << "</text>\n";
  double plot_w = kW - kL - kR;
  double bw = plot_w / static_cast<double>(heights.size());
  for (size_t i = 0; i < heights.size(); ++i) {
    double h = heights[i] / hmax * (kH - kT - kB);
    os << "<rect x='" << kL + bw * i << "' y='" << kH - kB - h << "' width='"
       << bw * 0.9 << "' height='" << h << "' fill='#1f77b4'/>\n";
  }
  for (size_t i = 0; i < bin_edges.size(); i += 4) {
    os << "<text x='" << kL + bw * i << "' y='" << kH - kB + 16
       << "' text-anchor='middle' font-size='10'>" << bin_edges[i] << "</text>\n";
  }
  os << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR
     << "' y2='" << kH - kB << "' stroke='black'/>\n";
  os << "</svg>\n";
  return os.str();
}

} // namespace dsca
