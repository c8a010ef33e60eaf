#pragma once

// Loss-vs-alpha plot as a standalone SVG. One series per (loss, lambda,
// source): theory rows become polylines, simulation rows markers with
// standard-error bars. Output depends only on the curve, byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gul/harness/curve.hpp"

namespace gul::harness {

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace detail

inline std::string render_svg(const LearningCurve& curve) {
  require(!curve.rows.empty(), ErrorKind::InvalidArgument, "cannot plot an empty curve");
  using Key = std::tuple<int, double, int>;
  std::map<Key, std::vector<const CurveRow*>> series;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
  for (const auto& r : curve.rows) {
    series[{static_cast<int>(r.loss), r.lambda, static_cast<int>(r.source)}].push_back(&r);
    xmin = std::min(xmin, r.alpha);
    xmax = std::max(xmax, r.alpha);
    if (std::isfinite(r.mean_loss)) {
      const double hi = r.mean_loss + (r.stderr_loss ? *r.stderr_loss : 0.0);
      ymax = std::max(ymax, hi);
      ymin = std::min(ymin, r.mean_loss - (r.stderr_loss ? *r.stderr_loss : 0.0));
    }
  }
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double ystep = detail::nice_step(ymax - ymin);
  ymax = std::ceil(ymax / ystep) * ystep;
  ymin = std::floor(ymin / ystep) * ystep;
  const double xstep = detail::nice_step(xmax - xmin);

  constexpr double W = 720, H = 460, L = 70, R = 200, T = 30, B = 60;
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return T + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"460\" viewBox=\"0 0 720 460\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"720\" height=\"460\" fill=\"white\"/>\n";
  o << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double y = ymin; y <= ymax + 1e-9 * ystep; y += ystep) {
    o << "<line x1=\"" << detail::fmt("%.2f", L) << "\" y1=\"" << detail::fmt("%.2f", sy(y)) << "\" x2=\""
      << detail::fmt("%.2f", L + pw) << "\" y2=\"" << detail::fmt("%.2f", sy(y)) << "\"/>\n";
  }
  o << "</g>\n";
  o << "<rect x=\"" << detail::fmt("%.2f", L) << "\" y=\"" << detail::fmt("%.2f", T) << "\" width=\""
    << detail::fmt("%.2f", pw) << "\" height=\"" << detail::fmt("%.2f", ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double y = ymin; y <= ymax + 1e-9 * ystep; y += ystep) {
    o << "<text x=\"" << detail::fmt("%.2f", L - 6) << "\" y=\"" << detail::fmt("%.2f", sy(y) + 4)
      << "\" text-anchor=\"end\">" << detail::fmt("%g", std::abs(y) < 1e-12 * ystep ? 0.0 : y) << "</text>\n";
  }
  for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9 * xstep; x += xstep) {
    o << "<text x=\"" << detail::fmt("%.2f", sx(x)) << "\" y=\"" << detail::fmt("%.2f", T + ph + 18)
      << "\" text-anchor=\"middle\">" << detail::fmt("%g", x) << "</text>\n";
  }
  o << "<text x=\"" << detail::fmt("%.2f", L + pw / 2) << "\" y=\"" << detail::fmt("%.2f", H - 15)
    << "\" text-anchor=\"middle\">alpha = n / p</text>\n";
  o << "<text x=\"18\" y=\"" << detail::fmt("%.2f", T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << detail::fmt("%.2f", T + ph / 2) << ")\">training loss</text>\n";

  // Colors are keyed by (loss, lambda) so theory and simulation of one setting match.
  std::map<std::pair<int, double>, int> color_of;
  for (const auto& [key, rows] : series) {
    const auto ck = std::pair(std::get<0>(key), std::get<1>(key));
    if (!color_of.count(ck)) color_of.emplace(ck, static_cast<int>(color_of.size()) % 10);
  }

  int legend = 0;
  for (const auto& [key, rows] : series) {
    const char* color = palette[color_of.at({std::get<0>(key), std::get<1>(key)})];
    const bool theory = std::get<2>(key) == static_cast<int>(Source::Theory);
    if (theory) {
      std::string pts;
      auto flush = [&] {
        if (!pts.empty()) {
          o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
          pts.clear();
        }
      };
      for (const CurveRow* r : rows) {
        if (!std::isfinite(r->mean_loss)) {
          flush();
          continue;
        }
        if (!pts.empty()) pts += ' ';
        pts += detail::fmt("%.2f", sx(r->alpha)) + "," + detail::fmt("%.2f", sy(r->mean_loss));
      }
      flush();
      if (rows.size() == 1 && std::isfinite(rows.front()->mean_loss)) {
        o << "<circle cx=\"" << detail::fmt("%.2f", sx(rows.front()->alpha)) << "\" cy=\""
          << detail::fmt("%.2f", sy(rows.front()->mean_loss)) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
      }
    } else {
      for (const CurveRow* r : rows) {
        if (!std::isfinite(r->mean_loss)) continue;
        const double cx = sx(r->alpha), cy = sy(r->mean_loss);
        if (r->stderr_loss) {
          o << "<line x1=\"" << detail::fmt("%.2f", cx) << "\" y1=\"" << detail::fmt("%.2f", sy(r->mean_loss - *r->stderr_loss))
            << "\" x2=\"" << detail::fmt("%.2f", cx) << "\" y2=\"" << detail::fmt("%.2f", sy(r->mean_loss + *r->stderr_loss))
            << "\" stroke=\"" << color << "\"/>\n";
        }
        o << "<circle cx=\"" << detail::fmt("%.2f", cx) << "\" cy=\"" << detail::fmt("%.2f", cy)
          << "\" r=\"4\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
      }
    }
    const double ly = T + 10 + 20 * legend;
    const double lx = L + pw + 15;
    if (theory) {
      o << "<line x1=\"" << detail::fmt("%.2f", lx) << "\" y1=\"" << detail::fmt("%.2f", ly) << "\" x2=\""
        << detail::fmt("%.2f", lx + 20) << "\" y2=\"" << detail::fmt("%.2f", ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    } else {
      o << "<circle cx=\"" << detail::fmt("%.2f", lx + 10) << "\" cy=\"" << detail::fmt("%.2f", ly)
        << "\" r=\"4\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    }
    o << "<text class=\"legend\" x=\"" << detail::fmt("%.2f", lx + 26) << "\" y=\"" << detail::fmt("%.2f", ly + 4)
      << "\">" << to_string(static_cast<LossKind>(std::get<0>(key))) << " lambda=" << detail::fmt("%g", std::get<1>(key))
      << ' ' << (theory ? "theory" : "simulation") << "</text>\n";
    ++legend;
  }
  o << "</svg>\n";
  return o.str();
}

inline void emit_svg(const LearningCurve& curve, const std::string& path) {
  const std::string svg = render_svg(curve);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path + "'");
  out << svg;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path + "'");
}

}  // namespace gul::harness
