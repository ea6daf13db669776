#include "papnf/cli/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace papnf::cli {

namespace {

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_fan_chart(const FanChart& chart, int width, int height) {
  const double left = 56, right = 16, top = 32, bottom = 36;
  const std::size_t hist = chart.history.size();
  const std::size_t horizon = chart.median.size();
  const std::size_t steps = hist + horizon;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* series : {&chart.history, &chart.truth, &chart.lo95, &chart.hi95, &chart.median}) {
    for (double v : *series) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto px = [&](std::size_t t) {
    return left + (width - left - right) * static_cast<double>(t) / static_cast<double>(std::max<std::size_t>(steps - 1, 1));
  };
  auto py = [&](double v) { return top + (height - top - bottom) * (hi - v) / (hi - lo); };
  auto polyline = [&](const std::vector<double>& v, std::size_t offset) {
    std::string pts;
    for (std::size_t i = 0; i < v.size(); ++i) pts += num(px(offset + i)) + "," + num(py(v[i])) + " ";
    return pts;
  };
  auto band = [&](const std::vector<double>& lower, const std::vector<double>& upper) {
    std::string pts = polyline(upper, hist);
    for (std::size_t i = lower.size(); i-- > 0;) pts += num(px(hist + i)) + "," + num(py(lower[i])) + " ";
    return pts;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << escape_xml(chart.title) << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"#444\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v)
        << "</text>\n";
  }
  svg << "<line x1=\"" << num(px(hist)) << "\" y1=\"" << top << "\" x2=\"" << num(px(hist)) << "\" y2=\""
      << height - bottom << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
  svg << "<polygon points=\"" << band(chart.lo95, chart.hi95) << "\" fill=\"#1f77b4\" fill-opacity=\"0.15\"/>\n";
  svg << "<polygon points=\"" << band(chart.lo90, chart.hi90) << "\" fill=\"#1f77b4\" fill-opacity=\"0.2\"/>\n";
  svg << "<polygon points=\"" << band(chart.lo80, chart.hi80) << "\" fill=\"#1f77b4\" fill-opacity=\"0.25\"/>\n";
  svg << "<polyline points=\"" << polyline(chart.history, 0) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg << "<polyline points=\"" << polyline(chart.truth, hist)
      << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  svg << "<polyline points=\"" << polyline(chart.median, hist)
      << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
  svg << "<text x=\"" << width - right << "\" y=\"20\" text-anchor=\"end\">median (blue), truth (red), "
      << "80/90/95% bands</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace papnf::cli
