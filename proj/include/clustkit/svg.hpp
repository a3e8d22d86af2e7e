#pragma once

// Minimal self-contained SVG charts: polylines with axes, and bar charts.

#include "clustkit/core.hpp"

#include <cstdio>
#include <sstream>

namespace clustkit::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

inline std::string num(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", v);
  return buffer;
}

inline std::string label(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4g", v);
  return buffer;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  return {x0, x1, y0, y1};
}

inline void open(std::ostringstream& out, const std::string& title, const std::string& x_label,
                 const std::string& y_label, const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  const double bottom = kHeight - kBottom;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << bottom << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << label(yv)
        << "</text>\n";
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(bottom + 16) << "\" text-anchor=\"middle\">"
        << label(xv) << "</text>\n";
  }
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << num(kHeight / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(kHeight / 2) << ")\">" << escape(y_label) << "</text>\n";
}

}  // namespace detail

/// Line chart; non-finite points are skipped.
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const auto f = detail::make_frame(x0, x1, y0, y1);
  std::ostringstream out;
  detail::open(out, title, x_label, y_label, f);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << (first ? "" : " ") << detail::num(f.px(s.x[i])) << ',' << detail::num(f.py(s.y[i]));
      first = false;
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        out << "<circle cx=\"" << detail::num(f.px(s.x[i])) << "\" cy=\"" << detail::num(f.py(s.y[i]))
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    if (!s.name.empty())
      out << "<text x=\"" << detail::num(detail::kWidth - detail::kRight - 4) << "\" y=\""
          << detail::num(detail::kTop + 14.0 * static_cast<double>(k)) << "\" text-anchor=\"end\" fill=\"" << color
          << "\">" << detail::escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Bar chart over positions 0..n-1. Non-finite bars are drawn grey at the top
/// of the axis (e.g. undefined reachability).
inline std::string bar_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                             const std::vector<double>& values) {
  double top = 0.0;
  for (double v : values)
    if (std::isfinite(v)) top = std::max(top, v);
  if (top <= 0.0) top = 1.0;
  top *= 1.05;
  const auto f = detail::make_frame(0.0, static_cast<double>(std::max<std::size_t>(values.size(), 1)), 0.0, top);
  std::ostringstream out;
  detail::open(out, title, x_label, y_label, f);
  const double width = std::max(0.5, (f.px(1.0) - f.px(0.0)) * 0.9);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool finite = std::isfinite(values[i]);
    const double v = finite ? std::max(0.0, values[i]) : top;
    const double y = f.py(v);
    out << "<rect x=\"" << detail::num(f.px(static_cast<double>(i))) << "\" y=\"" << detail::num(y) << "\" width=\""
        << detail::num(width) << "\" height=\"" << detail::num(f.py(0.0) - y) << "\" fill=\""
        << (finite ? detail::kPalette[0] : "#bbbbbb") << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace clustkit::svg
