#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tqa/csv.hpp"
#include "tqa/errors.hpp"
#include "tqa/stats.hpp"

namespace tqa::svg {

// Minimal static SVG plotting: enough for histogram overlays and scatter
// plots with group centroids. All numbers go through the shortest
// round-trip formatter, so output bytes are reproducible.

inline std::string num(double v) { return csv::format_double(v); }

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)),
        ylabel_(std::move(ylabel)) {}

  void set_range(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    x0_ = x0;
    x1_ = x1;
    y0_ = y0;
    y1_ = y1;
  }

  double mx(double x) const {
    return left_ + (x - x0_) / (x1_ - x0_) * (width_ - left_ - right_);
  }
  double my(double y) const {
    return height_ - bottom_ - (y - y0_) / (y1_ - y0_) * (height_ - top_ - bottom_);
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& color, double width, bool dashed = false) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << num(width) << "\"";
    if (dashed) body_ << " stroke-dasharray=\"6 4\"";
    body_ << " points=\"";
    for (const auto& [x, y] : pts) body_ << num(mx(x)) << ',' << num(my(y)) << ' ';
    body_ << "\"/>\n";
  }

  void vline(double x, const std::string& color, double width, bool dashed = true) {
    body_ << "<line x1=\"" << num(mx(x)) << "\" y1=\"" << num(my(y0_))
          << "\" x2=\"" << num(mx(x)) << "\" y2=\"" << num(my(y1_))
          << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"";
    if (dashed) body_ << " stroke-dasharray=\"4 4\"";
    body_ << "/>\n";
  }

  void triangle(double x, double y, const std::string& color, double size = 4.0) {
    const double cx = mx(x), cy = my(y);
    body_ << "<path d=\"M" << num(cx) << ' ' << num(cy - size) << " L"
          << num(cx - size) << ' ' << num(cy + size) << " L" << num(cx + size)
          << ' ' << num(cy + size) << " Z\" fill=\"" << color
          << "\" fill-opacity=\"0.6\"/>\n";
  }

  void square(double x, double y, const std::string& color, double size = 6.0) {
    body_ << "<rect x=\"" << num(mx(x) - size) << "\" y=\"" << num(my(y) - size)
          << "\" width=\"" << num(2 * size) << "\" height=\"" << num(2 * size)
          << "\" fill=\"" << color << "\" stroke=\"#333333\"/>\n";
  }

  void legend_entry(const std::string& name, const std::string& color) {
    legend_.emplace_back(name, color);
  }

  std::string render() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
        << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << ' '
        << height_ << "\">\n";
    out << "<rect width=\"" << width_ << "\" height=\"" << height_
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width_ / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << title_ << "</text>\n";

    // axes
    out << "<line x1=\"" << num(left_) << "\" y1=\"" << num(height_ - bottom_)
        << "\" x2=\"" << num(width_ - right_) << "\" y2=\""
        << num(height_ - bottom_) << "\" stroke=\"#333333\"/>\n";
    out << "<line x1=\"" << num(left_) << "\" y1=\"" << num(height_ - bottom_)
        << "\" x2=\"" << num(left_) << "\" y2=\"" << num(top_)
        << "\" stroke=\"#333333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double fx = x0_ + (x1_ - x0_) * i / 5.0;
      const double fy = y0_ + (y1_ - y0_) * i / 5.0;
      out << "<text x=\"" << num(mx(fx)) << "\" y=\"" << num(height_ - bottom_ + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"10\">"
          << format_tick(fx) << "</text>\n";
      out << "<text x=\"" << num(left_ - 6) << "\" y=\"" << num(my(fy) + 3)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"10\">"
          << format_tick(fy) << "</text>\n";
    }
    out << "<text x=\"" << (left_ + (width_ - left_ - right_) / 2) << "\" y=\""
        << height_ - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">"
        << xlabel_ << "</text>\n";
    out << "<text x=\"14\" y=\"" << (top_ + (height_ - top_ - bottom_) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" transform=\"rotate(-90 14 "
        << (top_ + (height_ - top_ - bottom_) / 2) << ")\">" << ylabel_
        << "</text>\n";

    out << body_.str();

    double ly = top_ + 6;
    for (const auto& [name, color] : legend_) {
      out << "<rect x=\"" << num(width_ - right_ - 150) << "\" y=\"" << num(ly)
          << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
      out << "<text x=\"" << num(width_ - right_ - 132) << "\" y=\"" << num(ly + 10)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << name
          << "</text>\n";
      ly += 18;
    }
    out << "</svg>\n";
    return out.str();
  }

 private:
  static std::string format_tick(double v) {
    // short fixed form keeps ticks readable
    std::ostringstream s;
    const double a = std::fabs(v);
    if (v == 0.0) return "0";
    if (a >= 1000.0 || a < 0.01) {
      s.precision(2);
      s << std::scientific << v;
    } else {
      s.precision(a < 1.0 ? 3 : 2);
      s << std::fixed << v;
    }
    return s.str();
  }

  std::string title_, xlabel_, ylabel_;
  int width_ = 720, height_ = 480;
  double left_ = 64, right_ = 24, top_ = 40, bottom_ = 48;
  double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
  std::ostringstream body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

struct HistogramSeries {
  std::string name;
  std::string color;
  std::span<const double> values;
};

// Equal-width histogram overlay (densities) with one median line per
// series.
inline std::string histogram_overlay(const std::string& title,
                                     const std::vector<HistogramSeries>& series,
                                     int n_bins = 60) {
  if (series.empty() || n_bins < 1) throw InvalidInput("histogram: bad input");
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.values) {
      if (first) {
        lo = hi = v;
        first = false;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (first) throw InvalidInput("histogram: no values");
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / n_bins;

  std::vector<std::vector<double>> density(series.size(),
                                           std::vector<double>(n_bins, 0.0));
  double peak = 0.0;
  std::vector<double> medians(series.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (double v : series[s].values) {
      auto b = static_cast<std::size_t>((v - lo) / width);
      if (b >= static_cast<std::size_t>(n_bins)) b = n_bins - 1;
      density[s][b] += 1.0;
    }
    const double n = static_cast<double>(series[s].values.size());
    for (auto& d : density[s]) {
      d /= n * width;
      peak = std::max(peak, d);
    }
    std::vector<double> copy(series[s].values.begin(), series[s].values.end());
    medians[s] = median(std::move(copy));
  }

  Plot plot(title, "score (errors per thousand words)", "density");
  plot.set_range(lo, hi, 0.0, peak * 1.05);
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> steps;
    steps.reserve(2 * static_cast<std::size_t>(n_bins) + 2);
    steps.emplace_back(lo, 0.0);
    for (int b = 0; b < n_bins; ++b) {
      steps.emplace_back(lo + b * width, density[s][b]);
      steps.emplace_back(lo + (b + 1) * width, density[s][b]);
    }
    steps.emplace_back(hi, 0.0);
    plot.polyline(steps, series[s].color, 1.5);
    plot.vline(medians[s], series[s].color, 1.0);
    plot.legend_entry(series[s].name, series[s].color);
  }
  return plot.render();
}

struct ScatterGroup {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;
  bool has_centroid = false;
  std::pair<double, double> centroid{0.0, 0.0};
};

inline std::string scatter(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel,
                           const std::vector<ScatterGroup>& groups) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& g : groups)
    for (const auto& [x, y] : g.points) {
      if (first) {
        x0 = x1 = x;
        y0 = y1 = y;
        first = false;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  const double padx = (x1 - x0) * 0.06 + 1e-9;
  const double pady = (y1 - y0) * 0.06 + 1e-9;

  Plot plot(title, xlabel, ylabel);
  plot.set_range(x0 - padx, x1 + padx, y0 - pady, y1 + pady);
  for (const auto& g : groups) {
    for (const auto& [x, y] : g.points) plot.triangle(x, y, g.color);
    plot.legend_entry(g.name + " (n=" + std::to_string(g.points.size()) + ")",
                      g.color);
  }
  for (const auto& g : groups)
    if (g.has_centroid) plot.square(g.centroid.first, g.centroid.second, g.color);
  return plot.render();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << content;
}

}  // namespace tqa::svg
