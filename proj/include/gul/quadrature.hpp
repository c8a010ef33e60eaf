#pragma once

// One-dimensional Gaussian expectations E_{xi ~ N(0,1)}[g(m + s xi)].
//
// Two rules are provided. Gauss-Hermite (probabilists' convention, weights
// summing to one) is exact for polynomials and converges fast on smooth
// integrands. Integrands with kinks or jumps at known locations (the hinge
// channel) go through the split rule instead: the xi-line is cut at the
// breakpoints and every piece is covered by Gauss-Legendre panels against the
// Gaussian density, which restores spectral convergence on each smooth piece.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include "gul/error.hpp"

namespace gul {

struct GaussHermiteRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kDefaultQuadOrder = 127;

namespace detail {

/// Golub-Welsch on a symmetric tridiagonal Jacobi matrix with zero diagonal.
inline std::pair<std::vector<double>, std::vector<double>> golub_welsch(const Eigen::VectorXd& offdiag) {
  const Eigen::Index n = offdiag.size() + 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(Eigen::VectorXd::Zero(n), offdiag, Eigen::ComputeEigenvectors);
  require(es.info() == Eigen::Success, ErrorKind::NoConvergence, "Jacobi eigenproblem failed");
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    w[static_cast<std::size_t>(i)] = v0 * v0;
  }
  return {x, w};
}

/// Orthonormal probabilists' Hermite recurrence at x. Returns (p_n / p_{n-1},
/// log of the Christoffel sum sum_{k<n} p_k^2, p_{n-1}/scale) in scaled form.
struct HermiteEval {
  double pn = 0.0;        // p_n(x) * scale
  double pn1 = 0.0;       // p_{n-1}(x) * scale
  double log_sum = 0.0;   // log sum_{k=0}^{n-1} p_k(x)^2
};

inline HermiteEval hermite_eval(int n, double x) {
  double prev = 0.0;
  double cur = 1.0;  // p_0
  double sum = 1.0;
  double log_scale = 0.0;  // actual = stored * exp(log_scale)
  for (int k = 0; k < n; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
    prev = cur;
    cur = next;
    if (k + 1 < n) sum += cur * cur;
    if (std::abs(cur) > 1e100) {
      prev *= 1e-100;
      cur *= 1e-100;
      sum *= 1e-200;
      log_scale += 100.0 * std::numbers::ln10;
    }
  }
  return {cur, prev, std::log(sum) + 2.0 * log_scale};
}

template <class R>
inline void axpy(R& acc, double w, const R& v) {
  if constexpr (std::is_arithmetic_v<R>) {
    acc += w * v;
  } else {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
}

template <class R>
inline bool all_finite(const R& v) {
  if constexpr (std::is_arithmetic_v<R>) {
    return std::isfinite(v);
  } else {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  }
}

template <class R>
inline R zero_like() {
  if constexpr (std::is_arithmetic_v<R>) return R{0};
  else {
    R r{};
    std::fill(r.begin(), r.end(), 0.0);
    return r;
  }
}

template <class R>
inline R checked(R v) {
  if (!all_finite(v)) fail(ErrorKind::NonFiniteEvaluation, "integrand returned a non-finite value");
  return v;
}

}  // namespace detail

/// Probabilists' Gauss-Hermite rule, normalized to the N(0,1) measure.
inline GaussHermiteRule gh_rule(int order) {
  if (order < 1 || order > 512) fail(ErrorKind::OrderOutOfRange, "order must lie in [1, 512]");
  GaussHermiteRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd off(order - 1);
  for (int k = 1; k < order; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  auto [x, w0] = detail::golub_welsch(off);

  // Polish nodes with Newton on p_n and recompute weights from the Christoffel
  // function; eigenvector weights lose relative accuracy in the tails.
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int it = 0; it < 3; ++it) {
      const auto e = detail::hermite_eval(order, x[i]);
      if (e.pn1 == 0.0) break;
      x[i] -= e.pn / (std::sqrt(static_cast<double>(order)) * e.pn1);
    }
    w[i] = std::exp(-detail::hermite_eval(order, x[i]).log_sum);
  }
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double node = 0.5 * (x[n - 1 - i] - x[i]);
    const double weight = 0.5 * (w[i] + w[n - 1 - i]);
    x[i] = -node;
    x[n - 1 - i] = node;
    w[i] = w[n - 1 - i] = weight;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  rule.nodes = std::move(x);
  rule.weights = std::move(w);
  return rule;
}

/// sum_i w_i g(m + s x_i); exactly g(m) when s == 0.
template <class G>
auto expect_gaussian(const GaussHermiteRule& rule, G&& g, double m, double s) {
  using R = std::decay_t<std::invoke_result_t<G&, double>>;
  require(s >= 0.0, ErrorKind::InvalidArgument, "standard deviation must be non-negative");
  if (s == 0.0) return detail::checked<R>(g(m));
  R acc = detail::zero_like<R>();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    detail::axpy(acc, rule.weights[i], detail::checked<R>(g(m + s * rule.nodes[i])));
  }
  return acc;
}

/// (1/2) sum_{y = -1, +1} E[h(y, m + s xi)].
template <class H>
auto expect_label_avg(const GaussHermiteRule& rule, H&& h, double m, double s) {
  auto minus = expect_gaussian(rule, [&](double x) { return h(-1.0, x); }, m, s);
  auto plus = expect_gaussian(rule, [&](double x) { return h(1.0, x); }, m, s);
  auto out = detail::zero_like<decltype(minus)>();
  detail::axpy(out, 0.5, minus);
  detail::axpy(out, 0.5, plus);
  return out;
}

// ---------------------------------------------------------------------------
// Split rule

struct SplitRule {
  std::vector<double> nodes;    // Gauss-Legendre on [-1, 1]
  std::vector<double> weights;
  double half_width = 12.0;     // xi range covered
  double max_panel = 1.0;       // panel length cap in xi units
};

inline SplitRule split_rule(int points_per_panel = 20, double half_width = 12.0, double max_panel = 1.0) {
  require(points_per_panel >= 2 && points_per_panel <= 512, ErrorKind::OrderOutOfRange,
          "panel order must lie in [2, 512]");
  Eigen::VectorXd off(points_per_panel - 1);
  for (int k = 1; k < points_per_panel; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  auto [x, w] = detail::golub_welsch(off);
  for (double& v : w) v *= 2.0;
  return SplitRule{std::move(x), std::move(w), half_width, max_panel};
}

/// E[g(m + s xi)] with the xi-line cut at the images of `breaks` (given in the
/// argument space of g). Mass beyond |xi| > half_width is dropped.
template <class G>
auto expect_gaussian_split(const SplitRule& rule, G&& g, double m, double s, std::span<const double> breaks) {
  using R = std::decay_t<std::invoke_result_t<G&, double>>;
  require(s >= 0.0, ErrorKind::InvalidArgument, "standard deviation must be non-negative");
  if (s == 0.0) return detail::checked<R>(g(m));
  const double L = rule.half_width;
  std::vector<double> cuts{-L, L};
  for (double b : breaks) {
    const double xi = (b - m) / s;
    if (xi > -L && xi < L) cuts.push_back(xi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;
  R acc = detail::zero_like<R>();
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / rule.max_panel)));
    const double h = (b - a) / panels;
    for (int j = 0; j < panels; ++j) {
      const double lo = a + j * h;
      const double mid = lo + 0.5 * h;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double xi = mid + 0.5 * h * rule.nodes[i];
        const double w = 0.5 * h * rule.weights[i] * inv_sqrt_2pi * std::exp(-0.5 * xi * xi);
        detail::axpy(acc, w, detail::checked<R>(g(m + s * xi)));
      }
    }
  }
  return acc;
}

}  // namespace gul
