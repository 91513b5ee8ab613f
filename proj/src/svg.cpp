#include "emg2artic/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace emg2artic::svg {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Piecewise-linear through viridis anchor colours; lightness increases
/// monotonically along the ramp.
std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> anchors = {{{68, 1, 84},
                                                                    {59, 82, 139},
                                                                    {33, 145, 140},
                                                                    {94, 201, 98},
                                                                    {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(anchors.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), anchors.size() - 2);
  const double w = t - static_cast<double>(i);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(anchors[i][0] * (1 - w) + anchors[i + 1][0] * w)),
                static_cast<int>(std::lround(anchors[i][1] * (1 - w) + anchors[i + 1][1] * w)),
                static_cast<int>(std::lround(anchors[i][2] * (1 - w) + anchors[i + 1][2] * w)));
  return buf;
}

std::string header(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
                 const char* fill = "black") {
  return "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", y) + "\" text-anchor=\"" + anchor +
         "\" font-size=\"" + std::to_string(size) + "\" fill=\"" + fill + "\">" + escape(s) + "</text>\n";
}

}  // namespace

std::string escape(const std::string& s) {
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

std::string heatmap(const MatD& values, const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                    const std::string& title, double vmin, double vmax) {
  if (static_cast<Eigen::Index>(rows.size()) != values.rows() || static_cast<Eigen::Index>(cols.size()) != values.cols())
    throw std::invalid_argument("heatmap: label counts do not match the matrix");
  if (!(vmax > vmin)) throw std::invalid_argument("heatmap: empty colour range");
  const int cell = 56, left = 110, top = 50;
  const int w = left + cell * static_cast<int>(values.cols()) + 90;
  const int h = top + cell * static_cast<int>(values.rows()) + 30;
  std::string s = header(w, h);
  s += text(w / 2.0, 24, title, "middle", 15);
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    s += text(left + cell * (c + 0.5), top - 8, cols[static_cast<std::size_t>(c)]);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    s += text(left - 8, top + cell * (r + 0.5) + 4, rows[static_cast<std::size_t>(r)], "end");
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      const double t = std::isfinite(v) ? (v - vmin) / (vmax - vmin) : 0.0;
      s += "<rect x=\"" + std::to_string(left + cell * c) + "\" y=\"" + std::to_string(top + cell * r) +
           "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + ramp(t) +
           "\" stroke=\"white\"/>\n";
      s += text(left + cell * (c + 0.5), top + cell * (r + 0.5) + 4, std::isfinite(v) ? fmt("%.2f", v) : "n/a",
                "middle", 11, std::clamp(t, 0.0, 1.0) > 0.6 ? "black" : "white");
    }
  }
  // colour bar
  const int bx = left + cell * static_cast<int>(values.cols()) + 20, bh = cell * static_cast<int>(values.rows());
  for (int i = 0; i < 20; ++i)
    s += "<rect x=\"" + std::to_string(bx) + "\" y=\"" + fmt("%.1f", top + bh * (19 - i) / 20.0) +
         "\" width=\"14\" height=\"" + fmt("%.1f", bh / 20.0 + 0.5) + "\" fill=\"" + ramp((i + 0.5) / 20.0) + "\"/>\n";
  s += text(bx + 18, top + 10, fmt("%.2f", vmax), "start", 10);
  s += text(bx + 18, top + bh, fmt("%.2f", vmin), "start", 10);
  return s + "</svg>\n";
}

std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<double>& lo, const std::vector<double>& hi, const std::string& title,
                      double ymin, double ymax) {
  if (labels.size() != values.size()) throw std::invalid_argument("bar_chart: label count mismatch");
  const bool whiskers = !lo.empty();
  if (whiskers && (lo.size() != values.size() || hi.size() != values.size()))
    throw std::invalid_argument("bar_chart: interval count mismatch");
  if (!(ymax > ymin)) throw std::invalid_argument("bar_chart: empty range");
  const int bar = 30, left = 60, top = 45, plot_h = 260, bottom = 90;
  const int w = left + bar * static_cast<int>(values.size()) + 30, h = top + plot_h + bottom;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - (std::clamp(v, ymin, ymax) - ymin) / (ymax - ymin)); };
  std::string s = header(w, h);
  s += text(w / 2.0, 24, title, "middle", 15);
  for (int i = 0; i <= 4; ++i) {
    const double v = ymin + (ymax - ymin) * i / 4.0;
    s += "<line x1=\"" + std::to_string(left) + "\" x2=\"" + std::to_string(w - 20) + "\" y1=\"" + fmt("%.1f", y_of(v)) +
         "\" y2=\"" + fmt("%.1f", y_of(v)) + "\" stroke=\"#dddddd\"/>\n";
    s += text(left - 6, y_of(v) + 4, fmt("%.2f", v), "end", 10);
  }
  const double zero = y_of(std::clamp(0.0, ymin, ymax));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = left + bar * static_cast<double>(i);
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double y = y_of(v);
    s += "<rect x=\"" + fmt("%.1f", x + 4) + "\" y=\"" + fmt("%.1f", std::min(y, zero)) + "\" width=\"" +
         std::to_string(bar - 8) + "\" height=\"" + fmt("%.1f", std::abs(zero - y)) + "\" fill=\"#3b528b\"/>\n";
    if (whiskers && std::isfinite(lo[i]) && std::isfinite(hi[i])) {
      const double cx = x + bar / 2.0;
      s += "<line x1=\"" + fmt("%.1f", cx) + "\" x2=\"" + fmt("%.1f", cx) + "\" y1=\"" + fmt("%.1f", y_of(lo[i])) +
           "\" y2=\"" + fmt("%.1f", y_of(hi[i])) + "\" stroke=\"black\"/>\n";
    }
    const double ly = top + plot_h + 10;
    s += "<text x=\"" + fmt("%.1f", x + bar / 2.0) + "\" y=\"" + fmt("%.1f", ly) +
         "\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-60 " + fmt("%.1f", x + bar / 2.0) + " " +
         fmt("%.1f", ly) + ")\">" + escape(labels[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace emg2artic::svg
