#include "rfp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rfp {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr int kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// round limits to pleasant tick spacing
std::vector<double> ticks(double lo, double hi, int want = 6) {
  if (!(hi > lo)) {
    const double pad = std::max(1e-12, std::abs(lo) * 0.1 + 1e-6);
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / want;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  const double start = std::ceil(lo / step) * step;
  for (double t = start; t <= hi + 1e-12 * step; t += step)
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return out;
}

}  // namespace

void LinePlot::add_series(std::string name, std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("LinePlot: x and y lengths differ");
  series_.push_back(
      {std::move(name), {x.begin(), x.end()}, {y.begin(), y.end()}});
}

std::string LinePlot::render() const {
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series_) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        xlo = xhi = s.x[i];
        ylo = yhi = s.y[i];
        first = false;
      }
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!(xhi > xlo)) xhi = xlo + 1;
  if (!(yhi > ylo)) {
    const double pad = std::max(1e-12, std::abs(ylo) * 0.1 + 1e-6);
    ylo -= pad;
    yhi += pad;
  } else {
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }

  const auto X = [&](double x) {
    return kLeft + (x - xlo) / (xhi - xlo) * (kWidth - kLeft - kRight);
  };
  const auto Y = [&](double y) {
    return kHeight - kBottom -
           (y - ylo) / (yhi - ylo) * (kHeight - kTop - kBottom);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">"
     << title_ << "</text>\n";

  for (double t : ticks(xlo, xhi)) {
    const double px = X(t);
    os << "<line x1=\"" << fmt(px) << "\" y1=\"" << kTop << "\" x2=\""
       << fmt(px) << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt(px) << "\" y=\"" << kHeight - kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << fmt(t) << "</text>\n";
  }
  for (double t : ticks(ylo, yhi)) {
    const double py = Y(t);
    os << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(py) << "\" x2=\""
       << kWidth - kRight << "\" y2=\"" << fmt(py)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(py + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << fmt(t) << "</text>\n";
  }
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
     << kWidth - kLeft - kRight << "\" height=\""
     << kHeight - kTop - kBottom
     << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\">"
     << xlabel_ << "</text>\n";
  os << "<text x=\"16\" y=\"" << kHeight / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\" transform=\"rotate(-90 16 "
     << kHeight / 2 << ")\">" << ylabel_ << "</text>\n";

  for (size_t s = 0; s < series_.size(); ++s) {
    const auto& sr = series_[s];
    const char* color = kColors[s % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < sr.x.size(); ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
      os << fmt(X(sr.x[i])) << "," << fmt(Y(sr.y[i])) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 16 * s
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
       << "\">" << sr.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void LinePlot::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("LinePlot: cannot write " + path);
  out << render();
}

}  // namespace rfp
