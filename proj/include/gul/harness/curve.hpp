#pragma once

// Learning curves and their CSV form. Floats are written with 17 significant
// digits so that a CSV read back compares equal to the curve that produced it.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gul/error.hpp"
#include "gul/prox.hpp"

namespace gul::harness {

enum class Source { Theory, Simulation };

inline std::string to_string(Source s) { return s == Source::Theory ? "theory" : "simulation"; }

inline Source parse_source(const std::string& s) {
  if (s == "theory") return Source::Theory;
  if (s == "simulation") return Source::Simulation;
  fail(ErrorKind::Parse, "unknown source '" + s + "'");
}

struct CurveRow {
  LossKind loss = LossKind::Square;
  double alpha = 0.0;
  double lambda = 0.0;
  Source source = Source::Theory;
  double mean_loss = 0.0;
  std::optional<double> stderr_loss;
  double mean_01 = 0.0;
  std::optional<double> stderr_01;
  int n_seeds = 0;
  bool converged = true;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

/// Rows sorted by (loss, alpha, lambda, source).
struct LearningCurve {
  std::vector<CurveRow> rows;

  void sort() {
    std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
      return std::tuple(static_cast<int>(a.loss), a.alpha, a.lambda, static_cast<int>(a.source)) <
             std::tuple(static_cast<int>(b.loss), b.alpha, b.lambda, static_cast<int>(b.source));
    });
  }

  bool all_converged() const {
    return std::all_of(rows.begin(), rows.end(), [](const CurveRow& r) { return r.converged; });
  }

  friend bool operator==(const LearningCurve&, const LearningCurve&) = default;
};

inline constexpr const char* kCsvHeader =
    "loss,alpha,lambda,source,mean_loss,stderr_loss,mean_01,stderr_01,n_seeds,converged";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const LearningCurve& curve) {
  out << kCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : curve.rows) {
    out << to_string(r.loss) << ',' << format_double(r.alpha) << ',' << format_double(r.lambda) << ','
        << to_string(r.source) << ',' << format_double(r.mean_loss) << ',' << opt(r.stderr_loss) << ','
        << format_double(r.mean_01) << ',' << opt(r.stderr_01) << ',' << r.n_seeds << ','
        << (r.converged ? 1 : 0) << '\n';
  }
}

inline void write_csv(const std::string& path, const LearningCurve& curve) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path + "'");
  write_csv(out, curve);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path + "'");
}

namespace detail {

inline double parse_field(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(ErrorKind::Parse, where + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline LearningCurve read_csv(std::istream& in, const std::string& name) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kCsvHeader, ErrorKind::Parse, name + ":1: unexpected header");
  LearningCurve curve;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    const std::string where = name + ":" + std::to_string(lineno);
    require(f.size() == 10, ErrorKind::Parse, where + ": expected 10 fields, got " + std::to_string(f.size()));
    CurveRow r;
    try {
      r.loss = parse_loss(f[0]);
    } catch (const Error&) {
      fail(ErrorKind::Parse, where + ": unknown loss '" + f[0] + "'");
    }
    r.alpha = detail::parse_field(f[1], where);
    r.lambda = detail::parse_field(f[2], where);
    r.source = parse_source(f[3]);
    r.mean_loss = detail::parse_field(f[4], where);
    if (!f[5].empty()) r.stderr_loss = detail::parse_field(f[5], where);
    r.mean_01 = detail::parse_field(f[6], where);
    if (!f[7].empty()) r.stderr_01 = detail::parse_field(f[7], where);
    r.n_seeds = static_cast<int>(detail::parse_field(f[8], where));
    r.converged = detail::parse_field(f[9], where) != 0.0;
    curve.rows.push_back(r);
  }
  return curve;
}

inline LearningCurve read_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  return read_csv(in, path);
}

}  // namespace gul::harness
