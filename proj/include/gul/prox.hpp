#pragma once

// Convex margin losses l(x, y), their proximal maps
//   prox_{V l(., y)}(w) = argmin_z (z - w)^2 / (2V) + l(z, y)
// and the channel function f(y, w, V) = (prox - w) / V with its w-derivative.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "gul/error.hpp"

namespace gul {

enum class LossKind { Square, Hinge, Logistic };

constexpr std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::Square: return "square";
    case LossKind::Hinge: return "hinge";
    case LossKind::Logistic: return "logistic";
  }
  return "?";
}

inline LossKind parse_loss(std::string_view name) {
  if (name == "square" || name == "ridge") return LossKind::Square;
  if (name == "hinge") return LossKind::Hinge;
  if (name == "logistic") return LossKind::Logistic;
  fail(ErrorKind::InvalidArgument, "unknown loss '" + std::string(name) + "'");
}

struct ProxResult {
  double z = 0.0;
  double dz_domega = 0.0;  // in [0, 1]
};

namespace detail {

inline void check_label(double y) {
  if (y != 1.0 && y != -1.0) fail(ErrorKind::InvalidLabel, "label must be -1 or +1");
}

inline void check_v(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::NonPositiveV, "V must be positive and finite");
}

/// sigma(t) = 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + exp(t)) without overflow.
inline double log1pexp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

/// Root of u - w - V sigma(-u) = 0 (the logistic prox in margin units u = y z).
/// Newton inside the bracket [w, w + V]; falls back to bisection whenever the
/// Newton step leaves the bracket or fails to halve the previous step.
inline double logistic_margin_root(double w, double v) {
  double lo = w;
  double hi = w + v;
  auto residual = [&](double u) { return u - w - v * sigmoid(-u); };
  double u = std::clamp(w + v * sigmoid(-w) / (1.0 + 0.25 * v), lo, hi);
  double prev_step = hi - lo;
  for (int it = 0; it < 200; ++it) {
    const double r = residual(u);
    const double scale = std::max({1.0, std::abs(u), std::abs(w)});
    if (std::abs(r) <= 1e-12 * scale) return u;
    if (r > 0.0) hi = u; else lo = u;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * scale) return 0.5 * (lo + hi);
    const double s = sigmoid(u);
    const double deriv = 1.0 + v * s * (1.0 - s);
    double next = u - r / deriv;
    if (!(next > lo && next < hi) || std::abs(next - u) > 0.5 * prev_step) next = 0.5 * (lo + hi);
    prev_step = std::abs(next - u);
    u = next;
  }
  fail(ErrorKind::NoConvergence, "logistic prox root not found within 200 iterations");
}

}  // namespace detail

inline double loss_value(LossKind loss, double x, double y) {
  detail::check_label(y);
  switch (loss) {
    case LossKind::Square: return 0.5 * (x - y) * (x - y);
    case LossKind::Hinge: return std::max(0.0, 1.0 - y * x);
    case LossKind::Logistic: return detail::log1pexp(-y * x);
  }
  return 0.0;
}

/// Proximal point and its derivative in omega. Hinge branches are tested in the
/// order y*w >= 1, 1 - V <= y*w < 1, y*w < 1 - V.
inline ProxResult prox(LossKind loss, double v, double y, double omega) {
  detail::check_v(v);
  detail::check_label(y);
  switch (loss) {
    case LossKind::Square:
      return {(omega + v * y) / (1.0 + v), 1.0 / (1.0 + v)};
    case LossKind::Hinge: {
      const double w = y * omega;
      if (w >= 1.0) return {omega, 1.0};
      if (w >= 1.0 - v) return {y, 0.0};
      return {omega + y * v, 1.0};
    }
    case LossKind::Logistic: {
      const double u = detail::logistic_margin_root(y * omega, v);
      const double s = detail::sigmoid(u);
      return {y * u, 1.0 / (1.0 + v * s * (1.0 - s))};
    }
  }
  return {};
}

inline double f_ell(LossKind loss, double y, double omega, double v) {
  return (prox(loss, v, y, omega).z - omega) / v;
}

inline double df_ell_domega(LossKind loss, double y, double omega, double v) {
  return (prox(loss, v, y, omega).dz_domega - 1.0) / v;
}

/// Points in omega where prox or its derivative is not smooth. For the logistic
/// loss with V > 1 there are no kinks, but dz/domega switches between ~1 and
/// ~0 over an O(1) window around u = +-log V; those knees get a ladder of cuts
/// so that quadrature panels resolve them even when the omega spread is wide.
inline std::vector<double> prox_breakpoints(LossKind loss, double y, double v) {
  if (loss == LossKind::Hinge) return {y * (1.0 - v), y};
  if (loss == LossKind::Logistic && v > 1.0) {
    std::vector<double> out;
    for (double u : {std::log(v), -std::log(v)}) {
      const double knee = u - v * detail::sigmoid(-u);
      out.push_back(y * knee);
      for (double d : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        out.push_back(y * (knee - d));
        out.push_back(y * (knee + d));
      }
    }
    return out;
  }
  return {};
}

/// omega at which the proximal point changes sign: omega = V * l'(0, y).
inline double prox_zero_crossing(LossKind loss, double y, double v) {
  return loss == LossKind::Logistic ? -0.5 * y * v : -y * v;
}

}  // namespace gul
