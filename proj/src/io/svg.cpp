#include "omcrl/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

namespace omcrl::io {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string esc(const std::string& s) {
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
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a != 0 && (a >= 1e5 || a < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.1e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", v);
  }
  return buf;
}

void frame(std::ostringstream& os, const ChartText& t) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(t.title)
     << "</text>\n";
  os << "<text x=\"" << kLeft + (kWidth - kLeft - kRight) / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\">" << esc(t.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << kTop + (kHeight - kTop - kBottom) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << esc(t.y_label) << "</text>\n";
}

}  // namespace

std::vector<double> smooth(const std::vector<double>& y, int window) {
  std::vector<double> out(y.size(), std::numeric_limits<double>::quiet_NaN());
  std::deque<double> buf;
  double sum = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isfinite(y[i])) {
      buf.push_back(y[i]);
      sum += y[i];
      if (static_cast<int>(buf.size()) > window) {
        sum -= buf.front();
        buf.pop_front();
      }
    }
    if (!buf.empty()) out[i] = sum / static_cast<double>(buf.size());
  }
  return out;
}

std::string line_chart(const std::vector<Series>& series, const ChartText& text) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  frame(os, text);
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
    os << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(xv)) << "\" y2=\""
       << kTop + ph << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << tick(xv)
       << "</text>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
       << num(py(yv)) << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
       << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 8];
    std::string path;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      path += (path.empty() ? "M" : " L") + num(px(s.x[i])) + "," + num(py(s.y[i]));
    }
    if (!path.empty())
      os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(si);
    os << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 32
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly << "\">" << esc(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::vector<std::string>& groups, const std::vector<std::string>& bars,
                      const std::vector<std::vector<double>>& values, const ChartText& text) {
  double y1 = 0;
  for (const auto& g : values)
    for (double v : g)
      if (std::isfinite(v)) y1 = std::max(y1, v);
  if (y1 <= 0) y1 = 1;
  y1 *= 1.1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double group_w = pw / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  const double bar_w = 0.8 * group_w / static_cast<double>(std::max<std::size_t>(1, bars.size()));
  std::ostringstream os;
  frame(os, text);
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
     << "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double yv = y1 * k / 5, y = kTop + (1 - yv / y1) * ph;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(yv)
       << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
    for (std::size_t b = 0; b < bars.size() && b < values[g].size(); ++b) {
      const double v = std::isfinite(values[g][b]) ? values[g][b] : 0.0;
      const double h = v / y1 * ph;
      os << "<rect x=\"" << num(gx + bar_w * static_cast<double>(b)) << "\" y=\"" << num(kTop + ph - h)
         << "\" width=\"" << num(bar_w * 0.95) << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[b % 8]
         << "\"/>\n";
    }
    os << "<text x=\"" << num(gx + 0.4 * group_w) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
       << esc(groups[g]) << "</text>\n";
  }
  for (std::size_t b = 0; b < bars.size(); ++b) {
    const double ly = kTop + 14 + 18 * static_cast<double>(b);
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly - 10 << "\" width=\"14\" height=\"10\" fill=\""
       << kPalette[b % 8] << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight + 32 << "\" y=\"" << ly << "\">" << esc(bars[b]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace omcrl::io
