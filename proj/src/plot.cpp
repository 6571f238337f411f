#include "ctxscale/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ctxscale::plot {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;

  double map(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
};

}  // namespace

std::string render_svg(const Chart& chart) {
  Axis ax{chart.log_x}, ay{chart.log_y};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      x0 = std::min(x0, ax.map(s.x[i]));
      x1 = std::max(x1, ax.map(s.x[i]));
      y0 = std::min(y0, ay.map(s.y[i]));
      y1 = std::max(y1, ay.map(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  ax.lo = x0, ax.hi = x1, ay.lo = y0 - pad, ay.hi = y1 + pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  if (!chart.timestamp.empty()) svg += "<metadata>generated " + escape(chart.timestamp) + "</metadata>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(chart.title) + "</text>\n";
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double fx = ax.lo + (ax.hi - ax.lo) * k / 4.0, fy = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double vx = ax.log ? std::pow(10.0, fx) : fx, vy = ay.log ? std::pow(10.0, fy) : fy;
    const double sx = kLeft + pw * k / 4.0, sy = kTop + ph - ph * k / 4.0;
    svg += "<text x=\"" + num(sx) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" + tick(vx) +
           "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(sy + 4) + "\" text-anchor=\"end\">" + tick(vy) +
           "</text>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(sy) + "\" y2=\"" + num(sy) +
           "\" stroke=\"#ddd\"/>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 14) + "\" text-anchor=\"middle\">" +
         escape(chart.x_label) + (ax.log ? " (log)" : "") + "</text>\n";
  svg += "<text transform=\"translate(16," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(chart.y_label) + (ay.log ? " (log)" : "") + "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const std::string color = kPalette[si % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      const bool hl = s.highlight && *s.highlight == i;
      svg += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"" + (hl ? "6" : "2.5") +
             "\" fill=\"" + (hl ? "none" : color) + "\" stroke=\"" + color + "\"" + (hl ? " stroke-width=\"2\"" : "") +
             "/>\n";
    }
    if (!pts.empty()) {
      pts.pop_back();
      svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 12 + 16.0 * static_cast<double>(si);
    svg += "<line x1=\"" + num(kLeft + pw + 10) + "\" x2=\"" + num(kLeft + pw + 28) + "\" y1=\"" + num(ly - 4) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kLeft + pw + 32) + "\" y=\"" + num(ly) + "\">" + escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace ctxscale::plot
