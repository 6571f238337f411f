#pragma once

// Minimal static SVG line charts.

#include <optional>
#include <string>
#include <vector>

namespace ctxscale::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::optional<std::size_t> highlight;  // index drawn as a larger marker
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
  std::string timestamp;  // emitted as metadata when nonempty
};

/// Points that cannot be drawn (non-finite, or non-positive on a log axis) are skipped.
std::string render_svg(const Chart& chart);

}  // namespace ctxscale::plot
