#include "defed/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace defed {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
constexpr int kPaletteSize = 8;
constexpr double kPi = 3.14159265358979323846;

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

/* Round tick labels: nearest "nice" number of the form {1,2,5} x 10^k. */
std::vector<double> linear_ticks(double lo, double hi, int target) {
  std::vector<double> ticks;
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  if (raw / mag > 5) {
    step = 10 * mag;
  } else if (raw / mag > 2) {
    step = 5 * mag;
  } else if (raw / mag > 1) {
    step = 2 * mag;
  }
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 0.5 * step; v += step) ticks.push_back(v);
  return ticks;
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  const int klo = static_cast<int>(std::ceil(std::log10(lo) - 1e-12));
  const int khi = static_cast<int>(std::floor(std::log10(hi) + 1e-12));
  for (int k = klo; k <= khi; ++k) ticks.push_back(std::pow(10.0, k));
  if (ticks.empty()) ticks = {lo, hi};
  return ticks;
}

std::string tick_label(double v) {
  std::ostringstream out;
  if (v != 0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3)) {
    out.precision(0);
    out << std::scientific << v;
  } else {
    out.precision(6);
    out << v;
  }
  return out.str();
}

}  // namespace

std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& options) {
  const double left = 72, right = 24, top = 40, bottom = 48;
  const double w = options.width, h = options.height;
  const double plot_w = w - left - right;
  const double plot_h = h - top - bottom;

  // Collect plottable points per series.
  struct Placed {
    std::string label;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Placed> placed;
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  bool any = false;
  for (const Series& s : series) {
    Placed p;
    p.label = s.label;
    const size_t n = std::min(s.x.size(), s.y.size());
    for (size_t i = 0; i < n; ++i) {
      double x = s.x[i], y = s.y[i];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (options.log_x && !(x > 0)) continue;
      if (options.log_y && !(y > 0)) continue;
      if (!any) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        any = true;
      } else {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
      p.pts.emplace_back(x, y);
    }
    placed.push_back(std::move(p));
  }
  if (!any) {
    x_lo = options.log_x ? 1 : 0;
    x_hi = options.log_x ? 10 : 1;
    y_lo = options.log_y ? 1 : 0;
    y_hi = options.log_y ? 10 : 1;
  }
  if (x_hi == x_lo) x_hi = x_lo + (options.log_x ? x_lo * 9 : 1);
  if (y_hi == y_lo) y_hi = y_lo + (options.log_y ? y_lo * 9 : 1);

  const auto map_x = [&](double x) {
    const double u = options.log_x ? (std::log10(x) - std::log10(x_lo)) /
                                         (std::log10(x_hi) - std::log10(x_lo))
                                   : (x - x_lo) / (x_hi - x_lo);
    return left + u * plot_w;
  };
  const auto map_y = [&](double y) {
    const double u = options.log_y ? (std::log10(y) - std::log10(y_lo)) /
                                         (std::log10(y_hi) - std::log10(y_lo))
                                   : (y - y_lo) / (y_hi - y_lo);
    return top + (1.0 - u) * plot_h;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << " " << options.height
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"15\" fill=\"#222\">" << escape(options.title) << "</text>\n";

  // Axes box.
  out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const std::vector<double> xt =
      options.log_x ? log_ticks(x_lo, x_hi) : linear_ticks(x_lo, x_hi, 6);
  for (const double v : xt) {
    if (v < x_lo || v > x_hi) continue;
    const double px = map_x(v);
    out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(top + plot_h + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">"
        << tick_label(v) << "</text>\n";
  }
  const std::vector<double> yt =
      options.log_y ? log_ticks(y_lo, y_hi) : linear_ticks(y_lo, y_hi, 6);
  for (const double v : yt) {
    if (v < y_lo || v > y_hi) continue;
    const double py = map_y(v);
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(left + plot_w)
        << "\" y2=\"" << fmt(py) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">"
        << tick_label(v) << "</text>\n";
  }

  out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(h - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
      << escape(options.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt(top + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\""
      << " transform=\"rotate(-90 16 " << fmt(top + plot_h / 2) << ")\">"
      << escape(options.y_label) << "</text>\n";

  for (size_t s = 0; s < placed.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    if (placed[s].pts.size() >= 2) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
      for (const auto& [x, y] : placed[s].pts) {
        out << fmt(map_x(x)) << "," << fmt(map_y(y)) << " ";
      }
      out << "\"/>\n";
    } else if (placed[s].pts.size() == 1) {
      const auto& [x, y] = placed[s].pts.front();
      out << "<circle cx=\"" << fmt(map_x(x)) << "\" cy=\"" << fmt(map_y(y))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    // Legend entry.
    const double ly = top + 14 + 16 * static_cast<double>(s);
    out << "<line x1=\"" << fmt(left + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(left + 34) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(left + 40) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">"
        << escape(placed[s].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_line_chart(const std::string& path, const std::vector<Series>& series,
                      const ChartOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write chart file: " + path);
  out << render_line_chart(series, options);
}

std::string render_graph(const Eigen::MatrixXd& weights) {
  const int n = static_cast<int>(weights.rows());
  if (n < 1 || weights.cols() != n) {
    throw std::invalid_argument("render_graph: matrix must be square and non-empty");
  }
  const double size = 560;
  const double cx = size / 2, cy = size / 2;
  const double radius = size / 2 - 60;
  const double max_off =
      n > 1 ? (weights - weights.diagonal().asDiagonal().toDenseMatrix()).maxCoeff() : 1.0;

  std::vector<std::pair<double, double>> pos(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n - kPi / 2;
    pos[static_cast<size_t>(i)] = {cx + radius * std::cos(a), cy + radius * std::sin(a)};
  }

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double wij = std::max(weights(i, j), weights(j, i));
      if (wij <= 0) continue;
      const double opacity =
          max_off > 0 ? std::min(1.0, 0.15 + 0.85 * wij / max_off) : 1.0;
      out << "<line x1=\"" << fmt(pos[static_cast<size_t>(i)].first) << "\" y1=\""
          << fmt(pos[static_cast<size_t>(i)].second) << "\" x2=\""
          << fmt(pos[static_cast<size_t>(j)].first) << "\" y2=\""
          << fmt(pos[static_cast<size_t>(j)].second) << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\""
          << " stroke-opacity=\"" << fmt(opacity) << "\"/>\n";
    }
  }
  for (int i = 0; i < n; ++i) {
    out << "<circle cx=\"" << fmt(pos[static_cast<size_t>(i)].first) << "\" cy=\""
        << fmt(pos[static_cast<size_t>(i)].second) << "\" r=\"14\" fill=\"#fff\""
        << " stroke=\"#333\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << fmt(pos[static_cast<size_t>(i)].first) << "\" y=\""
        << fmt(pos[static_cast<size_t>(i)].second + 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
        << i << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_graph(const std::string& path, const Eigen::MatrixXd& weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << render_graph(weights);
}

}  // namespace defed
