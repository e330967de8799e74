#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "causarm/csv.hpp"
#include "causarm/matrix.hpp"

namespace causarm::svg {

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

namespace detail {

struct Frame {
  double width, height;
  double left, right, top, bottom;  // margins
  double x_min, x_max, y_min, y_max;

  double sx(double x) const {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  }
  double sy(double y) const {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  }
};

inline void pad_range(double& lo, double& hi) {
  if (hi - lo < 1e-12) {
    const double pad = std::max(1e-6, std::fabs(hi) * 0.1 + 1e-6);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
}

inline std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt_short(w) + "\" height=\"" + fmt_short(h) + "\" viewBox=\"0 0 " +
         fmt_short(w) + " " + fmt_short(h) + "\">\n";
}

inline std::string text(double x, double y, const std::string& s, int size = 12,
                        const std::string& anchor = "start",
                        const std::string& extra = "") {
  return "<text x=\"" + fmt_short(x) + "\" y=\"" + fmt_short(y) +
         "\" font-size=\"" + std::to_string(size) +
         "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\"" + extra +
         ">" + escape(s) + "</text>\n";
}

inline std::string axes(const Frame& f, const std::string& x_label,
                        const std::string& y_label) {
  std::string out;
  out += "<line x1=\"" + fmt_short(f.left) + "\" y1=\"" + fmt_short(f.height - f.bottom) +
         "\" x2=\"" + fmt_short(f.width - f.right) + "\" y2=\"" +
         fmt_short(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + fmt_short(f.left) + "\" y1=\"" + fmt_short(f.top) + "\" x2=\"" +
         fmt_short(f.left) + "\" y2=\"" + fmt_short(f.height - f.bottom) +
         "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = f.x_min + (f.x_max - f.x_min) * i / ticks;
    const double yv = f.y_min + (f.y_max - f.y_min) * i / ticks;
    out += "<line x1=\"" + fmt_short(f.sx(xv)) + "\" y1=\"" +
           fmt_short(f.height - f.bottom) + "\" x2=\"" + fmt_short(f.sx(xv)) +
           "\" y2=\"" + fmt_short(f.height - f.bottom + 4) + "\" stroke=\"black\"/>\n";
    out += text(f.sx(xv), f.height - f.bottom + 16, fmt_short(xv), 10, "middle");
    out += "<line x1=\"" + fmt_short(f.left - 4) + "\" y1=\"" + fmt_short(f.sy(yv)) +
           "\" x2=\"" + fmt_short(f.left) + "\" y2=\"" + fmt_short(f.sy(yv)) +
           "\" stroke=\"black\"/>\n";
    out += text(f.left - 6, f.sy(yv) + 3, fmt_short(yv), 10, "end");
  }
  out += text((f.left + f.width - f.right) / 2, f.height - 6, x_label, 12, "middle");
  out += text(14, (f.top + f.height - f.bottom) / 2, y_label, 12, "middle",
              " transform=\"rotate(-90 14 " +
                  fmt_short((f.top + f.height - f.bottom) / 2) + ")\"");
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

}  // namespace detail

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // optional half-width around y
};

// Line chart with optional shaded error bands, one polyline per series.
inline std::string line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<LineSeries>& series,
                              double width = 640, double height = 420) {
  detail::Frame f{width, height, 56, 16, 28, 40, 0, 1, 0, 1};
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double band = s.band.empty() ? 0.0 : s.band[i];
      if (first) {
        f.x_min = f.x_max = s.x[i];
        f.y_min = s.y[i] - band;
        f.y_max = s.y[i] + band;
        first = false;
      } else {
        f.x_min = std::min(f.x_min, s.x[i]);
        f.x_max = std::max(f.x_max, s.x[i]);
        f.y_min = std::min(f.y_min, s.y[i] - band);
        f.y_max = std::max(f.y_max, s.y[i] + band);
      }
    }
  if (first) f = detail::Frame{width, height, 56, 16, 28, 40, 0, 1, 0, 1};
  detail::pad_range(f.x_min, f.x_max);
  detail::pad_range(f.y_min, f.y_max);

  std::string out = detail::header(width, height);
  out += detail::text(width / 2, 18, title, 13, "middle");
  out += detail::axes(f, x_label, y_label);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::palette(si);
    if (!s.band.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        pts += fmt_short(f.sx(s.x[i])) + "," + fmt_short(f.sy(s.y[i] + s.band[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        pts += fmt_short(f.sx(s.x[i])) + "," + fmt_short(f.sy(s.y[i] - s.band[i])) + " ";
      out += "<polygon points=\"" + pts + "\" fill=\"" + color +
             "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      pts += fmt_short(f.sx(s.x[i])) + "," + fmt_short(f.sy(s.y[i])) + " ";
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    out += detail::text(width - f.right - 130, f.top + 14 + 14 * si, s.label, 11,
                        "start", std::string(" fill=\"") + color + "\"");
  }
  out += "</svg>\n";
  return out;
}

// Scatter plot, solid dots.
inline std::string scatter(const std::string& title, const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<std::pair<double, double>>& points,
                           double width = 520, double height = 420) {
  detail::Frame f{width, height, 56, 16, 28, 40, 0, 1, 0, 1};
  bool first = true;
  for (const auto& [x, y] : points) {
    if (first) {
      f.x_min = f.x_max = x;
      f.y_min = f.y_max = y;
      first = false;
    } else {
      f.x_min = std::min(f.x_min, x);
      f.x_max = std::max(f.x_max, x);
      f.y_min = std::min(f.y_min, y);
      f.y_max = std::max(f.y_max, y);
    }
  }
  detail::pad_range(f.x_min, f.x_max);
  detail::pad_range(f.y_min, f.y_max);

  std::string out = detail::header(width, height);
  out += detail::text(width / 2, 18, title, 13, "middle");
  out += detail::axes(f, x_label, y_label);
  for (const auto& [x, y] : points)
    out += "<circle cx=\"" + fmt_short(f.sx(x)) + "\" cy=\"" + fmt_short(f.sy(y)) +
           "\" r=\"2.4\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
  out += "</svg>\n";
  return out;
}

// Heat map with row/column labels; cell shade scales with the value.
inline std::string heatmap(const std::string& title,
                           const std::vector<std::string>& row_labels,
                           const std::vector<std::string>& col_labels,
                           const Matrix& values) {
  if (values.rows() != row_labels.size() || values.cols() != col_labels.size())
    throw InvalidInput("heatmap: label count mismatch");
  const double cell = 26.0;
  const double left = 64.0, top = 48.0, bottom = 70.0, right = 20.0;
  const double width = left + cell * values.cols() + right;
  const double height = top + cell * values.rows() + bottom;

  double vmax = 0.0;
  for (double v : values.data()) vmax = std::max(vmax, std::fabs(v));
  if (vmax == 0.0) vmax = 1.0;

  std::string out = detail::header(width, height);
  out += detail::text(width / 2, 20, title, 13, "middle");
  for (std::size_t r = 0; r < values.rows(); ++r) {
    out += detail::text(left - 6, top + cell * r + cell * 0.65, row_labels[r], 10, "end");
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double t = std::fabs(values(r, c)) / vmax;
      // white -> deep blue ramp
      const int red = static_cast<int>(std::lround(255 - 224 * t));
      const int green = static_cast<int>(std::lround(255 - 180 * t));
      const int blue = static_cast<int>(std::lround(255 - 75 * t));
      out += "<rect x=\"" + fmt_short(left + cell * c) + "\" y=\"" +
             fmt_short(top + cell * r) + "\" width=\"" + fmt_short(cell) +
             "\" height=\"" + fmt_short(cell) + "\" fill=\"rgb(" +
             std::to_string(red) + "," + std::to_string(green) + "," +
             std::to_string(blue) + ")\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n";
    }
  }
  for (std::size_t c = 0; c < values.cols(); ++c) {
    const double x = left + cell * c + cell * 0.65;
    const double y = top + cell * values.rows() + 8;
    out += detail::text(x, y, col_labels[c], 10, "end",
                        " transform=\"rotate(-60 " + fmt_short(x) + " " + fmt_short(y) +
                            ")\"");
  }
  out += detail::text(left, height - 10, "max |value| = " + fmt_short(vmax), 10);
  out += "</svg>\n";
  return out;
}

}  // namespace causarm::svg
