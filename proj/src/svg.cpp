#include "nlv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nlv {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};

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

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string px(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void header(std::ostream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << px(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double pos(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
};

Axis fit_axis(const std::vector<double>& v, bool log) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v) {
    if (!std::isfinite(x) || (log && x <= 0.0)) continue;
    const double t = log ? std::log10(x) : x;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

}  // namespace

void write_line_plot(const LinePlot& plot, const std::filesystem::path& path) {
  std::vector<double> xs, ys;
  for (const Series& s : plot.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Axis ax = fit_axis(xs, plot.log_x);
  const Axis ay = fit_axis(ys, plot.log_y);
  const double w = kWidth - kLeft - kRight;
  const double h = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + w * ax.pos(v); };
  auto sy = [&](double v) { return kTop + h * (1.0 - ay.pos(v)); };
  auto ok = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0.0) && (!plot.log_y || y > 0.0);
  };

  std::ofstream out = open(path);
  header(out, plot.title);
  out << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(w) << "\" height=\"" << px(h)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double tx = ax.lo + f * (ax.hi - ax.lo);
    const double ty = ay.lo + f * (ay.hi - ay.lo);
    const std::string lx = plot.log_x ? "1e" + num(tx) : num(tx);
    const std::string ly = plot.log_y ? "1e" + num(ty) : num(ty);
    out << "<text x=\"" << px(kLeft + f * w) << "\" y=\"" << px(kTop + h + 16) << "\" text-anchor=\"middle\">"
        << escape(lx) << "</text>\n";
    out << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(kTop + (1.0 - f) * h + 4)
        << "\" text-anchor=\"end\">" << escape(ly) << "</text>\n";
  }
  out << "<text x=\"" << px(kLeft + w / 2) << "\" y=\"" << px(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(plot.xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << px(kTop + h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << px(kTop + h / 2) << ")\">" << escape(plot.ylabel) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const char* color = kColors[k % std::size(kColors)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (!s.markers_only) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < n; ++i)
        if (ok(s.x[i], s.y[i])) out << px(sx(s.x[i])) << "," << px(sy(s.y[i])) << " ";
      out << "\"/>\n";
    }
    for (std::size_t i = 0; i < n; ++i)
      if (ok(s.x[i], s.y[i]))
        out << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(s.y[i])) << "\" r=\"2.5\" fill=\"" << color
            << "\"/>\n";
    const double ly = kTop + 14.0 * (k + 1);
    out << "<rect x=\"" << px(kWidth - kRight + 10) << "\" y=\"" << px(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << color << "\"/>\n";
    out << "<text x=\"" << px(kWidth - kRight + 24) << "\" y=\"" << px(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_heatmap(const Heatmap& map, const std::filesystem::path& path) {
  const std::size_t rows = map.values.size();
  const std::size_t cols = rows ? map.values[0].size() : 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : map.values)
    for (double v : r) {
      if (!std::isfinite(v) || (map.log_scale && v <= 0.0)) continue;
      const double t = map.log_scale ? std::log10(v) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) hi = lo + 1.0;

  const double w = kWidth - kLeft - kRight;
  const double h = kHeight - kTop - kBottom;
  std::ofstream out = open(path);
  header(out, map.title);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = map.values[i][j];
      const double cw = w / cols, ch = h / rows;
      const double x = kLeft + j * cw, y = kTop + (rows - 1 - i) * ch;
      std::string fill = "#cccccc";
      if (std::isfinite(v) && (!map.log_scale || v > 0.0)) {
        const double t = ((map.log_scale ? std::log10(v) : v) - lo) / (hi - lo);
        const int r = static_cast<int>(std::lround(255 * t));
        const int b = 255 - r;
        std::ostringstream c;
        c << "rgb(" << r << ",64," << b << ")";
        fill = c.str();
      }
      out << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(cw) << "\" height=\"" << px(ch)
          << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
      out << "<text x=\"" << px(x + cw / 2) << "\" y=\"" << px(y + ch / 2 + 4)
          << "\" text-anchor=\"middle\" fill=\"white\">" << escape(num(v)) << "</text>\n";
    }
  for (std::size_t j = 0; j < cols && j < map.x_ticks.size(); ++j)
    out << "<text x=\"" << px(kLeft + (j + 0.5) * w / cols) << "\" y=\"" << px(kTop + h + 16)
        << "\" text-anchor=\"middle\">" << escape(map.x_ticks[j]) << "</text>\n";
  for (std::size_t i = 0; i < rows && i < map.y_ticks.size(); ++i)
    out << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(kTop + (rows - 1 - i + 0.5) * h / rows + 4)
        << "\" text-anchor=\"end\">" << escape(map.y_ticks[i]) << "</text>\n";
  out << "<text x=\"" << px(kLeft + w / 2) << "\" y=\"" << px(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(map.xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << px(kTop + h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << px(kTop + h / 2) << ")\">" << escape(map.ylabel) << "</text>\n";
  out << "<text x=\"" << px(kWidth - kRight + 10) << "\" y=\"" << px(kTop + 12) << "\">"
      << (map.log_scale ? "log10 scale" : "linear scale") << "</text>\n";
  out << "<text x=\"" << px(kWidth - kRight + 10) << "\" y=\"" << px(kTop + 28) << "\">min "
      << escape(num(map.log_scale ? std::pow(10.0, lo) : lo)) << "</text>\n";
  out << "<text x=\"" << px(kWidth - kRight + 10) << "\" y=\"" << px(kTop + 44) << "\">max "
      << escape(num(map.log_scale ? std::pow(10.0, hi) : hi)) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace nlv
