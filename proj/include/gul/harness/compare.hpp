#pragma once

// Theory-vs-simulation comparison on the (loss, alpha, lambda) keys present in
// both curves. A point passes when |dev| <= max_dev or |z| <= max_z, where
// dev = simulation - theory and z = dev / stderr.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "gul/harness/config.hpp"
#include "gul/harness/curve.hpp"

namespace gul::harness {

struct ComparePoint {
  LossKind loss;
  double alpha = 0.0;
  double lambda = 0.0;
  double theory = 0.0;
  double simulation = 0.0;
  std::optional<double> stderr_loss;
  double deviation = 0.0;
  std::optional<double> z;
  bool pass = false;
};

struct CompareReport {
  std::vector<ComparePoint> points;
  Thresholds thresholds;
  double max_abs_dev = 0.0;
  double max_abs_z = 0.0;
  bool pass = true;
};

inline CompareReport run_compare(const LearningCurve& theory, const LearningCurve& sim,
                                 const Thresholds& thresholds = {}) {
  using Key = std::tuple<int, double, double>;
  std::map<Key, const CurveRow*> th;
  for (const auto& r : theory.rows) {
    if (r.source == Source::Theory) th[{static_cast<int>(r.loss), r.alpha, r.lambda}] = &r;
  }
  CompareReport rep;
  rep.thresholds = thresholds;
  for (const auto& s : sim.rows) {
    if (s.source != Source::Simulation) continue;
    const auto it = th.find({static_cast<int>(s.loss), s.alpha, s.lambda});
    if (it == th.end()) continue;
    const CurveRow& t = *it->second;
    ComparePoint pt;
    pt.loss = s.loss;
    pt.alpha = s.alpha;
    pt.lambda = s.lambda;
    pt.theory = t.mean_loss;
    pt.simulation = s.mean_loss;
    pt.stderr_loss = s.stderr_loss;
    pt.deviation = s.mean_loss - t.mean_loss;
    if (s.stderr_loss && *s.stderr_loss > 0.0) pt.z = pt.deviation / *s.stderr_loss;
    const bool finite = std::isfinite(pt.deviation) && t.converged && s.converged;
    pt.pass = finite && (std::abs(pt.deviation) <= thresholds.max_dev ||
                         (pt.z && std::abs(*pt.z) <= thresholds.max_z));
    if (std::isfinite(pt.deviation)) rep.max_abs_dev = std::max(rep.max_abs_dev, std::abs(pt.deviation));
    if (pt.z && std::isfinite(*pt.z)) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(*pt.z));
    rep.pass = rep.pass && pt.pass;
    rep.points.push_back(pt);
  }
  require(!rep.points.empty(), ErrorKind::EmptyIntersection,
          "theory and simulation curves share no (loss, alpha, lambda) point");
  return rep;
}

inline void write_report(std::ostream& out, const CompareReport& rep) {
  char buf[256];
  out << "theory-vs-simulation comparison\n";
  std::snprintf(buf, sizeof buf, "thresholds: max_dev=%.6g max_z=%.6g\n", rep.thresholds.max_dev,
                rep.thresholds.max_z);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-9s %10s %10s %12s %12s %12s %12s %9s  %s\n", "loss", "alpha", "lambda", "theory",
                "simulation", "stderr", "deviation", "z", "status");
  out << buf;
  for (const auto& p : rep.points) {
    char se[32] = "-";
    char z[32] = "-";
    if (p.stderr_loss) std::snprintf(se, sizeof se, "%.6g", *p.stderr_loss);
    if (p.z) std::snprintf(z, sizeof z, "%.3f", *p.z);
    std::snprintf(buf, sizeof buf, "%-9s %10.6g %10.6g %12.6g %12.6g %12s %12.6g %9s  %s\n",
                  std::string(to_string(p.loss)).c_str(), p.alpha, p.lambda, p.theory, p.simulation, se,
                  p.deviation, z, p.pass ? "ok" : "FAIL");
    out << buf;
  }
  std::size_t failed = 0;
  for (const auto& p : rep.points) failed += p.pass ? 0 : 1;
  std::snprintf(buf, sizeof buf, "points: %zu  failed: %zu  max|dev|: %.6g  max|z|: %.3f\n", rep.points.size(),
                failed, rep.max_abs_dev, rep.max_abs_z);
  out << buf;
  out << "result: " << (rep.pass ? "PASS" : "FAIL") << '\n';
}

inline void write_report_csv(std::ostream& out, const CompareReport& rep) {
  out << "loss,alpha,lambda,theory,simulation,stderr_loss,deviation,z,pass\n";
  for (const auto& p : rep.points) {
    out << to_string(p.loss) << ',' << format_double(p.alpha) << ',' << format_double(p.lambda) << ','
        << format_double(p.theory) << ',' << format_double(p.simulation) << ','
        << (p.stderr_loss ? format_double(*p.stderr_loss) : "") << ',' << format_double(p.deviation) << ','
        << (p.z ? format_double(*p.z) : "") << ',' << (p.pass ? 1 : 0) << '\n';
  }
}

}  // namespace gul::harness
