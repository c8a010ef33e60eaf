#pragma once

// Replica-symmetric saddle point for generalized linear classification of
// random labels on Gaussian mixtures.
//
// Conventions:
//  * lambda is the ridge strength of the empirical risk
//        (1/n) sum_mu l(theta^T x_mu, y_mu) + (lambda/2) |theta|^2
//    on unnormalized inputs x ~ N(mu_c, Sigma_c). In the resolvent
//    A = s I + sum_c V_hat_c Sigma_c it enters as the shift s = alpha * lambda.
//  * V_hat is stored non-negative: V_hat_c = -alpha rho_c avg_y E[d_omega f].
//  * omega = m_c + sqrt(q_c) xi, xi ~ N(0, 1).

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gul/error.hpp"
#include "gul/prox.hpp"
#include "gul/quadrature.hpp"
#include "gul/spectra.hpp"

namespace gul {

struct OverlapState {
  std::vector<Overlaps> order;
  std::vector<Conjugates> hats;
};

enum class QuadratureMode {
  Auto,     // Gauss-Hermite for smooth integrands, split rule at kinks and jumps
  Hermite,  // Gauss-Hermite everywhere
  Split,    // split rule everywhere
};

struct SaddleConfig {
  double damping = 0.5;
  double tol = 1e-11;
  int max_iter = 50000;
  int quad_order = kDefaultQuadOrder;
  int split_points = 20;
  QuadratureMode quadrature = QuadratureMode::Auto;
  std::optional<OverlapState> init;
  double lambda_floor = 1e-10;
  double min_damping = 1.0 / 64.0;
  int patience = 5;  // consecutive residual increases before halving the damping
  int anderson_depth = 5;  // 0 selects the plain damped iteration

  void validate() const {
    require(damping > 0.0 && damping <= 1.0, ErrorKind::InvalidArgument, "damping must lie in (0,1]");
    require(tol >= 1e-13, ErrorKind::InvalidArgument, "tol must be >= 1e-13");
    require(max_iter > 0, ErrorKind::InvalidArgument, "max_iter must be positive");
    require(lambda_floor > 0.0, ErrorKind::InvalidArgument, "lambda_floor must be positive");
    require(anderson_depth >= 0, ErrorKind::InvalidArgument, "anderson_depth must be >= 0");
  }
};

struct SaddleSolution {
  OverlapState state;
  int iterations = 0;
  double residual = 0.0;
  double training_loss = 0.0;
  double loss01 = 0.0;
  double resolvent_shift = 0.0;
};

/// Thrown when the damped iteration exhausts max_iter.
class SaddleNoConvergence : public Error {
 public:
  SaddleNoConvergence(int iterations, double residual, std::vector<double> tail, OverlapState last)
      : Error(ErrorKind::NoConvergence, "saddle point not converged after " + std::to_string(iterations) +
                                            " iterations (residual " + std::to_string(residual) + ")"),
        iterations_(iterations), residual_(residual), tail_(std::move(tail)), last_(std::move(last)) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }
  const std::vector<double>& residual_tail() const { return tail_; }
  const OverlapState& last_state() const { return last_; }

 private:
  int iterations_;
  double residual_;
  std::vector<double> tail_;
  OverlapState last_;
};

/// Gaussian expectations of channel integrands, dispatched on smoothness.
class ChannelIntegrator {
 public:
  explicit ChannelIntegrator(int quad_order = kDefaultQuadOrder, int split_points = 20,
                             QuadratureMode mode = QuadratureMode::Auto)
      : hermite_(gh_rule(quad_order)), split_(split_rule(split_points)), mode_(mode) {}

  explicit ChannelIntegrator(const SaddleConfig& cfg)
      : ChannelIntegrator(cfg.quad_order, cfg.split_points, cfg.quadrature) {}

  /// E[g(m + s xi)]; `breaks` lists argument values where g is not smooth.
  template <class G>
  auto operator()(G&& g, double m, double s, std::span<const double> breaks) const {
    const bool split = mode_ == QuadratureMode::Split || (mode_ == QuadratureMode::Auto && !breaks.empty());
    if (split) return expect_gaussian_split(split_, g, m, s, breaks);
    return expect_gaussian(hermite_, g, m, s);
  }

  const GaussHermiteRule& hermite() const { return hermite_; }

 private:
  GaussHermiteRule hermite_;
  SplitRule split_;
  QuadratureMode mode_;
};

/// Conjugates from order parameters:
///   m_hat_c = alpha rho_c avg_y E[f],  q_hat_c = alpha rho_c avg_y E[f^2],
///   V_hat_c = -alpha rho_c avg_y E[d_omega f]  (>= 0 for convex losses).
inline std::vector<Conjugates> output_channel(LossKind loss, std::span<const double> rho,
                                              std::span<const Overlaps> order, double alpha,
                                              const ChannelIntegrator& integ) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  require(rho.size() == order.size(), ErrorKind::DimensionMismatch, "weights and overlaps differ in length");
  std::vector<Conjugates> hats(order.size());
  for (std::size_t c = 0; c < order.size(); ++c) {
    const Overlaps& o = order[c];
    require(o.q >= 0.0 && o.V > 0.0, ErrorKind::InvalidArgument, "need q >= 0 and V > 0");
    std::array<double, 3> avg{0.0, 0.0, 0.0};
    for (double y : {-1.0, 1.0}) {
      const auto breaks = prox_breakpoints(loss, y, o.V);
      const auto e = integ(
          [&](double omega) {
            const ProxResult p = prox(loss, o.V, y, omega);
            const double f = (p.z - omega) / o.V;
            return std::array<double, 3>{f, f * f, (p.dz_domega - 1.0) / o.V};
          },
          o.m, std::sqrt(o.q), breaks);
      for (int i = 0; i < 3; ++i) avg[i] += 0.5 * e[i];
    }
    const double scale = alpha * rho[c];
    hats[c] = Conjugates{scale * avg[0], scale * avg[1], std::max(0.0, -scale * avg[2])};
  }
  return hats;
}

/// sum_c rho_c avg_y E[l(prox_{V_c}(m_c + sqrt(q_c) xi), y)].
inline double training_loss(LossKind loss, std::span<const double> rho, std::span<const Overlaps> order,
                            const ChannelIntegrator& integ) {
  require(rho.size() == order.size(), ErrorKind::DimensionMismatch, "weights and overlaps differ in length");
  double total = 0.0;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const Overlaps& o = order[c];
    for (double y : {-1.0, 1.0}) {
      const auto breaks = prox_breakpoints(loss, y, o.V);
      total += 0.5 * rho[c] *
               integ([&](double omega) { return loss_value(loss, prox(loss, o.V, y, omega).z, y); }, o.m,
                     std::sqrt(o.q), breaks);
    }
  }
  return total;
}

/// Plug-in 0/1 training error: sum_c rho_c avg_y P(y prox < 0).
inline double training_error01(LossKind loss, std::span<const double> rho, std::span<const Overlaps> order,
                               const ChannelIntegrator& integ) {
  double total = 0.0;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const Overlaps& o = order[c];
    for (double y : {-1.0, 1.0}) {
      auto breaks = prox_breakpoints(loss, y, o.V);
      breaks.push_back(prox_zero_crossing(loss, y, o.V));
      total += 0.5 * rho[c] *
               integ([&](double omega) { return y * prox(loss, o.V, y, omega).z < 0.0 ? 1.0 : 0.0; }, o.m,
                     std::sqrt(o.q), breaks);
    }
  }
  return total;
}

namespace detail {

inline double rel_change(double next, double prev) {
  return std::abs(next - prev) / std::max(1.0, std::abs(prev));
}

}  // namespace detail

namespace detail {

// Per cluster (m, log q, log V): V spans many decades in the lambda -> 0 limit.
inline constexpr double kLogFloor = 1e-300;

inline Eigen::VectorXd pack(std::span<const Overlaps> order) {
  Eigen::VectorXd x(3 * static_cast<Eigen::Index>(order.size()));
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto i = 3 * static_cast<Eigen::Index>(c);
    x(i) = order[c].m;
    x(i + 1) = std::log(std::max(order[c].q, kLogFloor));
    x(i + 2) = std::log(std::max(order[c].V, kLogFloor));
  }
  return x;
}

inline std::vector<Overlaps> unpack(const Eigen::VectorXd& x) {
  std::vector<Overlaps> order(static_cast<std::size_t>(x.size() / 3));
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto i = 3 * static_cast<Eigen::Index>(c);
    order[c] = Overlaps{x(i), std::exp(x(i + 1)), std::exp(x(i + 2))};
  }
  return order;
}

/// Anderson mixing over the last `depth` iterates (Walker-Ni form).
class AndersonMixer {
 public:
  explicit AndersonMixer(int depth) : depth_(depth) {}

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& f, double beta) {
    if (has_prev_) {
      dx_.push_back(x - prev_x_);
      df_.push_back(f - prev_f_);
      if (static_cast<int>(dx_.size()) > depth_) {
        dx_.pop_front();
        df_.pop_front();
      }
    }
    prev_x_ = x;
    prev_f_ = f;
    has_prev_ = true;
    Eigen::VectorXd next = x + beta * f;
    if (dx_.empty()) return next;
    const auto cols = static_cast<Eigen::Index>(df_.size());
    Eigen::MatrixXd dF(f.size(), cols), dX(x.size(), cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      dF.col(j) = df_[static_cast<std::size_t>(j)];
      dX.col(j) = dx_[static_cast<std::size_t>(j)];
    }
    const Eigen::VectorXd g = dF.colPivHouseholderQr().solve(f);
    if (!g.allFinite()) {
      reset();
      return next;
    }
    next -= (dX + beta * dF) * g;
    return next;
  }

  void reset() {
    dx_.clear();
    df_.clear();
    has_prev_ = false;
  }

 private:
  int depth_;
  bool has_prev_ = false;
  Eigen::VectorXd prev_x_, prev_f_;
  std::deque<Eigen::VectorXd> dx_, df_;
};

}  // namespace detail

/// Fixed-point iteration of output channel -> prior channel. With
/// `anderson_depth == 0` this is the plain damped iteration on (m, q, V);
/// otherwise damped steps on (m, log q, log V) are Anderson-mixed.
inline SaddleSolution solve_saddle(const MixtureModel& model, LossKind loss, double alpha, double lambda,
                                   const SaddleConfig& cfg = {}) {
  cfg.validate();
  require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  require(lambda >= 0.0, ErrorKind::InvalidArgument, "lambda must be non-negative");
  const std::size_t k = model.size();
  const std::vector<double> rho = model.weights();
  const ChannelIntegrator integ(cfg);
  const PriorChannel prior(model);
  const double shift = alpha * std::max(lambda, cfg.lambda_floor);

  OverlapState state;
  if (cfg.init && cfg.init->order.size() == k) {
    state = *cfg.init;
  } else {
    state.order.assign(k, Overlaps{0.0, 1.0, 1.0});
  }
  state.hats = output_channel(loss, rho, state.order, alpha, integ);

  double gamma = cfg.damping;
  double last_residual = std::numeric_limits<double>::infinity();
  double best_residual = last_residual;
  int increases = 0;
  constexpr int kStall = 25;
  constexpr int kPlainStretch = 100;
  int since_best = 0;
  int plain_left = 0;
  std::deque<double> tail;
  detail::AndersonMixer mixer(cfg.anderson_depth);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const auto hats = output_channel(loss, rho, state.order, alpha, integ);
    const auto next = prior(hats, shift);
    double residual = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      residual = std::max({residual, detail::rel_change(next[c].m, state.order[c].m),
                           detail::rel_change(next[c].q, state.order[c].q),
                           detail::rel_change(next[c].V, state.order[c].V),
                           detail::rel_change(hats[c].m_hat, state.hats[c].m_hat),
                           detail::rel_change(hats[c].q_hat, state.hats[c].q_hat),
                           detail::rel_change(hats[c].V_hat, state.hats[c].V_hat)});
    }
    if (!std::isfinite(residual)) {
      fail(ErrorKind::NonFiniteEvaluation, "saddle iteration produced non-finite values");
    }
    state.hats = hats;
    tail.push_back(residual);
    if (tail.size() > 20) tail.pop_front();

    if (residual <= cfg.tol) {
      state.order = next;
      state.hats = output_channel(loss, rho, state.order, alpha, integ);
      SaddleSolution sol;
      sol.state = std::move(state);
      sol.iterations = it;
      sol.residual = residual;
      sol.resolvent_shift = shift;
      sol.training_loss = training_loss(loss, rho, sol.state.order, integ);
      sol.loss01 = training_error01(loss, rho, sol.state.order, integ);
      return sol;
    }

    increases = residual > last_residual ? increases + 1 : 0;
    if (increases >= cfg.patience && gamma > cfg.min_damping) {
      gamma = std::max(cfg.min_damping, 0.5 * gamma);
      increases = 0;
      mixer.reset();
    }
    last_residual = residual;

    // Anderson steps are abandoned for a stretch of plain damped steps when
    // they stop producing new best residuals.
    if (residual < best_residual) {
      best_residual = residual;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cfg.anderson_depth > 0 && since_best >= kStall) {
      mixer.reset();
      plain_left = kPlainStretch;
      since_best = 0;
      best_residual = residual;
    }
    if (cfg.anderson_depth > 0 && plain_left == 0) {
      const Eigen::VectorXd x = detail::pack(state.order);
      const Eigen::VectorXd f = detail::pack(next) - x;
      Eigen::VectorXd x_next = mixer.step(x, f, gamma);
      if (!x_next.allFinite() || (x_next - x).cwiseAbs().maxCoeff() > 50.0) {
        mixer.reset();
        x_next = x + gamma * f;
      }
      state.order = detail::unpack(x_next);
    } else {
      if (plain_left > 0) --plain_left;
      for (std::size_t c = 0; c < k; ++c) {
        Overlaps& o = state.order[c];
        o.m = (1.0 - gamma) * o.m + gamma * next[c].m;
        o.q = (1.0 - gamma) * o.q + gamma * next[c].q;
        o.V = (1.0 - gamma) * o.V + gamma * next[c].V;
      }
    }
  }
  throw SaddleNoConvergence(cfg.max_iter, last_residual, {tail.begin(), tail.end()}, state);
}

/// Training loss of an already converged state.
inline double training_loss(LossKind loss, const MixtureModel& model, const OverlapState& state,
                            const ChannelIntegrator& integ = ChannelIntegrator{}) {
  const auto rho = model.weights();
  return training_loss(loss, rho, state.order, integ);
}

/// lambda -> 0+ square-loss training loss, (1/2)(1 - 1/alpha)_+.
inline double ridgeless_ridge_loss(double alpha) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  return 0.5 * std::max(0.0, 1.0 - 1.0 / alpha);
}

struct AnalyticChannel {
  double q_hat = 0.0;
  double V_hat = 0.0;
  double m_hat = 0.0;
};

/// Square-loss conjugates in closed form (rho = 1), omega ~ N(m, q).
inline AnalyticChannel square_analytic_channel(double m, double q, double v, double alpha) {
  require(v > -1.0, ErrorKind::InvalidArgument, "need V > -1");
  const double d = 1.0 + v;
  return {alpha * (1.0 + q + m * m) / (d * d), alpha / d, -alpha * m / d};
}

namespace detail {
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
}  // namespace detail

/// Hinge-loss conjugates (rho = 1) from Gaussian CDF/PDF pieces over the three
/// prox branches. With u = y omega ~ N(y m, q) the channel is f = y g(u), where
/// g = 0 for u >= 1, (1 - u)/V on [1 - V, 1) and 1 below 1 - V.
inline AnalyticChannel hinge_analytic_channel(double m, double q, double v, double alpha) {
  require(q > 0.0 && v > 0.0, ErrorKind::InvalidArgument, "need Q > 0 and V > 0");
  using detail::norm_cdf;
  using detail::norm_pdf;
  const double s = std::sqrt(q);
  AnalyticChannel out;
  for (double y : {-1.0, 1.0}) {
    const double mu = y * m;
    const double a = (1.0 - v - mu) / s;
    const double b = (1.0 - mu) / s;
    const double c = 1.0 - mu;
    const double mass = norm_cdf(b) - norm_cdf(a);
    const double dpdf = norm_pdf(a) - norm_pdf(b);
    const double t2 = mass + a * norm_pdf(a) - b * norm_pdf(b);  // E[t^2 1{a <= t < b}]
    const double eg = norm_cdf(a) + (c * mass - s * dpdf) / v;
    const double eg2 = norm_cdf(a) + (c * c * mass - 2.0 * c * s * dpdf + q * t2) / (v * v);
    out.m_hat += 0.5 * alpha * y * eg;
    out.q_hat += 0.5 * alpha * eg2;
    out.V_hat += 0.5 * alpha * mass / v;
  }
  return out;
}

/// Hinge training loss avg_y E[(1 - V - y omega)_+] in closed form (rho = 1).
inline double hinge_analytic_loss(double m, double q, double v) {
  const double s = std::sqrt(q);
  double total = 0.0;
  for (double y : {-1.0, 1.0}) {
    const double a = (1.0 - v - y * m) / s;
    total += 0.5 * s * (a * detail::norm_cdf(a) + detail::norm_pdf(a));
  }
  return total;
}

/// Rad = 1 - (2/alpha) e01, the random-label relation taken as stated.
inline double rademacher_estimate(double alpha, double e01) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  return 1.0 - 2.0 / alpha * e01;
}

struct RidgelessExtrapolation {
  std::array<double, 3> lambdas{1e-6, 1e-8, 1e-10};
  std::array<double, 3> losses{};
  double extrapolated = 0.0;
  double spread = 0.0;  // max - min over the three solves
};

/// Linear-in-lambda Richardson step from lambda in {1e-6, 1e-8, 1e-10}.
inline RidgelessExtrapolation extrapolate_ridgeless(const MixtureModel& model, LossKind loss, double alpha,
                                                    SaddleConfig cfg = {}) {
  RidgelessExtrapolation out;
  cfg.lambda_floor = std::min(cfg.lambda_floor, out.lambdas.back());
  for (std::size_t i = 0; i < 3; ++i) {
    const auto sol = solve_saddle(model, loss, alpha, out.lambdas[i], cfg);
    out.losses[i] = sol.training_loss;
    cfg.init = sol.state;
  }
  const double l1 = out.lambdas[1], l2 = out.lambdas[2];
  out.extrapolated = out.losses[2] - (out.losses[1] - out.losses[2]) * l2 / (l1 - l2);
  const auto [lo, hi] = std::minmax_element(out.losses.begin(), out.losses.end());
  out.spread = *hi - *lo;
  return out;
}

}  // namespace gul
