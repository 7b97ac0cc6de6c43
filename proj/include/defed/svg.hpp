#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

namespace defed {

// Self-contained SVG output; no plotting dependency.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 900;
  int height = 560;
};

// Line chart with axes, ticks and a legend.  Points that cannot be placed
// (NaN, or non-positive on a log axis) are dropped from their series.
std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& options);
void write_line_chart(const std::string& path, const std::vector<Series>& series,
                      const ChartOptions& options);

// Ring layout of the communication graph; edge opacity scales with weight.
std::string render_graph(const Eigen::MatrixXd& weights);
void write_graph(const std::string& path, const Eigen::MatrixXd& weights);

}  // namespace defed
