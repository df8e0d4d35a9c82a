#ifndef PSEUDOFIN_SVG_HPP
#define PSEUDOFIN_SVG_HPP

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pseudofin/dimension.hpp"

namespace pseudofin {

struct SvgSeries {
  std::string label;
  DimTrend trend;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// log-count against stage, one polyline per run of nonempty stages; empty
// stages (log = -inf) are left as gaps.
inline std::string trend_svg(const std::string& title, const std::vector<SvgSeries>& series) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  const double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
  std::size_t s_lo = SIZE_MAX, s_hi = 0;
  double y_lo = 0, y_hi = 1;
  bool any_gap = false;
  for (const auto& s : series) {
    s_lo = std::min(s_lo, s.trend.first_stage);
    s_hi = std::max(s_hi, s.trend.last_stage());
    for (std::size_t i = 0; i < s.trend.counts.size(); ++i) {
      const LogCount l = s.trend.log_at(i);
      if (l.neg_inf) any_gap = true;
      else y_hi = std::max(y_hi, l.value);
    }
  }
  if (series.empty()) s_lo = 0;
  if (s_hi <= s_lo) s_hi = s_lo + 1;
  auto px = [&](std::size_t s) { return left + (w - left - right) * static_cast<double>(s - s_lo) / static_cast<double>(s_hi - s_lo); };
  auto py = [&](double v) { return h - bottom - (h - top - bottom) * (v - y_lo) / (y_hi - y_lo); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">stage</text>\n";
  o << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2 << ")\" text-anchor=\"middle\">log count</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const std::size_t s = s_lo + (s_hi - s_lo) * static_cast<std::size_t>(t) / 4;
    const double v = y_lo + (y_hi - y_lo) * t / 4;
    o << "<text x=\"" << detail::num(px(s)) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << s << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << detail::num(py(v) + 4) << "\" text-anchor=\"end\">" << detail::num(v) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& t = series[k].trend;
    const char* color = colors[k % 4];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
      const LogCount l = t.log_at(i);
      if (l.neg_inf) {
        flush();
        continue;
      }
      pts += (pts.empty() ? "" : " ") + detail::num(px(t.first_stage + i)) + "," + detail::num(py(l.value));
      o << "<circle cx=\"" << detail::num(px(t.first_stage + i)) << "\" cy=\"" << detail::num(py(l.value)) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
    }
    flush();
    const double ly = top + 16 * static_cast<double>(k);
    o << "<rect x=\"" << left + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    o << "<text x=\"" << left + 26 << "\" y=\"" << ly << "\">" << detail::xml_escape(series[k].label) << "</text>\n";
  }
  if (any_gap)
    o << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 * static_cast<double>(series.size()) << "\" fill=\"gray\">gaps: empty set, log = -inf</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_SVG_HPP
