#pragma once

// Finite-size empirical risk minimization with random labels:
//   minimize (1/n) sum_mu l(theta . x_mu, y_mu) + (lambda/2) |theta|^2
// Samples are columns of X (p x n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "gul/error.hpp"
#include "gul/prox.hpp"
#include "gul/rng.hpp"
#include "gul/spectra.hpp"

namespace gul {

struct Dataset {
  MatrixXd X;  // p x n, one sample per column
  VectorXd y;  // labels in {-1, +1}
  std::string provenance;

  Index dim() const { return X.rows(); }
  Index size() const { return X.cols(); }

  void validate() const {
    require(y.size() == X.cols(), ErrorKind::DimensionMismatch, "label count differs from sample count");
    require(X.allFinite(), ErrorKind::InvalidArgument, "design matrix has non-finite entries");
    for (Index i = 0; i < y.size(); ++i) detail::check_label(y(i));
  }
};

struct FitResult {
  VectorXd theta;
  double objective = 0.0;
  double grad_norm_or_gap = 0.0;
  int iterations = 0;
};

struct TrainingMetrics {
  double train_loss = 0.0;
  double regularized_risk = 0.0;
  double zero_one = 0.0;
};

// ---------------------------------------------------------------------------
// Data generation

namespace detail {

/// Per-cluster sampler: x = mean + L g, with L diagonal when possible.
struct ClusterSampler {
  VectorXd mean;
  VectorXd diag;  // used when dense is empty
  MatrixXd dense;

  explicit ClusterSampler(const Cluster& c) : mean(c.mean) {
    const auto& rep = c.cov.rep();
    if (const auto* iso = std::get_if<Isotropic>(&rep)) {
      diag = VectorXd::Constant(iso->dim, std::sqrt(iso->scale));
    } else if (const auto* sp = std::get_if<Spectral>(&rep); sp && !sp->basis) {
      diag = sp->eigenvalues.cwiseSqrt();
    } else {
      dense = c.cov.sqrt_factor();
    }
  }

  void draw(CounterRng& rng, Eigen::Ref<VectorXd> out) const {
    VectorXd g(mean.size());
    for (Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    if (dense.size() == 0) out = mean + diag.cwiseProduct(g);
    else out.noalias() = mean + dense * g;
  }
};

}  // namespace detail

/// n samples from the mixture with Rademacher labels drawn independently of x.
/// Column mu depends only on (seed, mu).
inline Dataset sample_mixture(const MixtureModel& model, Index n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::InvalidArgument, "need at least one sample");
  std::vector<detail::ClusterSampler> samplers;
  for (const auto& c : model.clusters()) samplers.emplace_back(c);
  const auto rho = model.weights();
  Dataset d;
  d.X.resize(model.dim(), n);
  d.y.resize(n);
  for (Index mu = 0; mu < n; ++mu) {
    CounterRng rng(seed, static_cast<std::uint64_t>(mu));
    const double u = rng.uniform();
    std::size_t c = 0;
    double acc = rho[0];
    while (c + 1 < rho.size() && u >= acc) acc += rho[++c];
    d.y(mu) = rng.rademacher();
    samplers[c].draw(rng, d.X.col(mu));
  }
  d.provenance = "mixture(K=" + std::to_string(model.size()) + ", p=" + std::to_string(model.dim()) +
                 ", n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")";
  return d;
}

/// Rademacher labels for externally supplied inputs, keyed by (seed, mu).
inline VectorXd rademacher_labels(Index n, std::uint64_t seed) {
  VectorXd y(n);
  for (Index mu = 0; mu < n; ++mu) y(mu) = CounterRng(seed, static_cast<std::uint64_t>(mu), 1).rademacher();
  return y;
}

enum class Nonlinearity { Erf, Relu, Tanh };

inline Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "erf") return Nonlinearity::Erf;
  if (name == "relu") return Nonlinearity::Relu;
  if (name == "tanh") return Nonlinearity::Tanh;
  fail(ErrorKind::InvalidArgument, "unknown nonlinearity '" + std::string(name) + "'");
}

/// sigma(F z) column by column, F (p x d) with i.i.d. N(0, 1/d) entries.
inline MatrixXd random_features(const MatrixXd& Z, Index p, Nonlinearity nl, std::uint64_t seed) {
  require(p >= 1 && Z.rows() >= 1, ErrorKind::InvalidArgument, "feature dimensions must be positive");
  const Index d = Z.rows();
  MatrixXd F(p, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < p; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 2);
    for (Index j = 0; j < d; ++j) F(i, j) = scale * rng.normal();
  }
  MatrixXd out = F * Z;
  switch (nl) {
    case Nonlinearity::Erf: out = out.unaryExpr([](double v) { return std::erf(v); }); break;
    case Nonlinearity::Relu: out = out.cwiseMax(0.0); break;
    case Nonlinearity::Tanh: out = out.array().tanh().matrix(); break;
  }
  return out;
}

enum class Normalization { PerCoordinate, Global, None };

inline Normalization parse_normalization(std::string_view name) {
  if (name == "per_coordinate" || name == "standardize") return Normalization::PerCoordinate;
  if (name == "global") return Normalization::Global;
  if (name == "none") return Normalization::None;
  fail(ErrorKind::InvalidArgument, "unknown normalization '" + std::string(name) + "'");
}

inline std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::PerCoordinate: return "per_coordinate";
    case Normalization::Global: return "global";
    case Normalization::None: return "none";
  }
  return "?";
}

/// Centers and scales features (rows) of X in place. Per-coordinate mode
/// standardizes every row; constant rows are set to zero. Global mode removes
/// the grand mean and divides by the grand standard deviation.
inline void normalize_features(MatrixXd& X, Normalization mode) {
  if (mode == Normalization::None || X.size() == 0) return;
  const double n = static_cast<double>(X.cols());
  if (mode == Normalization::PerCoordinate) {
    for (Index i = 0; i < X.rows(); ++i) {
      auto row = X.row(i);
      const double mean = row.mean();
      row.array() -= mean;
      const double sd = std::sqrt(row.squaredNorm() / n);
      if (sd > 0.0) row /= sd;
      else row.setZero();
    }
  } else {
    const double mean = X.mean();
    X.array() -= mean;
    const double sd = std::sqrt(X.squaredNorm() / static_cast<double>(X.size()));
    if (sd > 0.0) X /= sd;
  }
}

// ---------------------------------------------------------------------------
// Metrics

inline TrainingMetrics training_metrics(const VectorXd& theta, const Dataset& data, LossKind loss,
                                        double lambda) {
  require(theta.size() == data.dim(), ErrorKind::DimensionMismatch, "theta length differs from p");
  const VectorXd margins = data.X.transpose() * theta;
  const Index n = data.size();
  TrainingMetrics m;
  double errors = 0.0;
  for (Index mu = 0; mu < n; ++mu) {
    m.train_loss += loss_value(loss, margins(mu), data.y(mu));
    const double s = margins(mu) > 0.0 ? 1.0 : (margins(mu) < 0.0 ? -1.0 : 0.0);
    if (s != data.y(mu)) errors += 1.0;
  }
  m.train_loss /= static_cast<double>(n);
  m.zero_one = errors / static_cast<double>(n);
  m.regularized_risk = m.train_loss + 0.5 * lambda * theta.squaredNorm();
  return m;
}

inline double regularized_objective(const VectorXd& theta, const Dataset& data, LossKind loss, double lambda) {
  return training_metrics(theta, data, loss, lambda).regularized_risk;
}

// ---------------------------------------------------------------------------
// Ridge

enum class RidgeForm { Auto, Primal, Dual };

/// Closed-form square-loss minimizer. lambda > 0 solves the p x p (primal) or
/// n x n (dual) system with lambda' = n lambda, whichever is smaller under
/// Auto. lambda = 0 returns the minimum-norm least-squares solution.
inline FitResult fit_ridge(const Dataset& data, double lambda, RidgeForm form = RidgeForm::Auto) {
  data.validate();
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument, "lambda must be non-negative");
  const MatrixXd& X = data.X;
  const Index p = X.rows();
  const Index n = X.cols();
  FitResult r;
  if (lambda == 0.0) {
    const bool primal = p <= n;
    const MatrixXd gram = primal ? MatrixXd(X * X.transpose()) : MatrixXd(X.transpose() * X);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * top) {
      fail(ErrorKind::SingularSystem, "normal matrix is rank deficient at lambda = 0");
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(X.transpose());
    r.theta = cod.solve(data.y);
  } else {
    const double lp = static_cast<double>(n) * lambda;
    const bool primal = form == RidgeForm::Primal || (form == RidgeForm::Auto && p <= n);
    if (primal) {
      MatrixXd a = X * X.transpose();
      a.diagonal().array() += lp;
      r.theta = a.llt().solve(X * data.y);
    } else {
      MatrixXd a = X.transpose() * X;
      a.diagonal().array() += lp;
      r.theta = X * a.llt().solve(data.y);
    }
  }
  const VectorXd resid = X.transpose() * r.theta - data.y;
  const VectorXd grad = X * resid / static_cast<double>(n) + lambda * r.theta;
  r.objective = 0.5 * resid.squaredNorm() / static_cast<double>(n) + 0.5 * lambda * r.theta.squaredNorm();
  r.grad_norm_or_gap = grad.norm();
  r.iterations = 1;
  return r;
}

// ---------------------------------------------------------------------------
// Logistic

/// Damped Newton with Armijo backtracking; stops when the gradient of the full
/// objective has Euclidean norm <= tol.
inline FitResult fit_logistic(const Dataset& data, double lambda, double tol = 1e-8, int max_iter = 100000) {
  data.validate();
  require(lambda > 0.0, ErrorKind::InvalidArgument, "logistic fit needs lambda > 0");
  require(tol > 0.0, ErrorKind::InvalidArgument, "tolerance must be positive");
  const MatrixXd& X = data.X;
  const Index p = X.rows();
  const double n = static_cast<double>(X.cols());
  VectorXd theta = VectorXd::Zero(p);

  auto objective = [&](const VectorXd& margins, const VectorXd& th) {
    double s = 0.0;
    for (Index mu = 0; mu < margins.size(); ++mu) s += detail::log1pexp(-data.y(mu) * margins(mu));
    return s / n + 0.5 * lambda * th.squaredNorm();
  };

  VectorXd margins = VectorXd::Zero(X.cols());
  double f = objective(margins, theta);
  FitResult r;
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd coef(X.cols());  // d loss / d margin
    VectorXd curv(X.cols());
    for (Index mu = 0; mu < coef.size(); ++mu) {
      const double t = data.y(mu) * margins(mu);
      const double s = detail::sigmoid(-t);
      coef(mu) = -data.y(mu) * s;
      curv(mu) = s * (1.0 - s);
    }
    const VectorXd grad = X * coef / n + lambda * theta;
    const double gnorm = grad.norm();
    if (gnorm <= tol) {
      r.theta = std::move(theta);
      r.objective = f;
      r.grad_norm_or_gap = gnorm;
      r.iterations = it - 1;
      return r;
    }
    MatrixXd hess = X * curv.asDiagonal() * X.transpose() / n;
    hess.diagonal().array() += lambda;
    const VectorXd step = -hess.llt().solve(grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    VectorXd cand;
    VectorXd cand_margins;
    double fc = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      cand = theta + t * step;
      cand_margins = X.transpose() * cand;
      fc = objective(cand_margins, cand);
      if (fc <= f + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (!(fc <= f)) {
      fail(ErrorKind::NoConvergence, "logistic line search failed with gradient norm " + std::to_string(gnorm));
    }
    theta = std::move(cand);
    margins = std::move(cand_margins);
    f = fc;
  }
  fail(ErrorKind::NoConvergence, "logistic fit did not reach the gradient tolerance");
}

// ---------------------------------------------------------------------------
// Hinge

/// Dual coordinate ascent on
///   max_a sum a_mu - |sum a_mu y_mu x_mu|^2 / 2,  0 <= a_mu <= C = 1/(lambda n),
/// which is the dual of (1/2)|theta|^2 + C sum hinge, a rescaling of the
/// regularized risk by 1/lambda. Stops when the relative duality gap is <= tol.
inline FitResult fit_hinge(const Dataset& data, double lambda, double tol = 1e-8, int max_epochs = 10000,
                           std::uint64_t seed = 0) {
  data.validate();
  require(lambda > 0.0, ErrorKind::InvalidArgument, "hinge fit needs lambda > 0");
  require(tol > 0.0, ErrorKind::InvalidArgument, "tolerance must be positive");
  const MatrixXd& X = data.X;
  const Index n = X.cols();
  const double C = 1.0 / (lambda * static_cast<double>(n));
  VectorXd a = VectorXd::Zero(n);
  VectorXd theta = VectorXd::Zero(X.rows());
  VectorXd qii(n);
  for (Index mu = 0; mu < n; ++mu) qii(mu) = X.col(mu).squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  auto gap_of = [&](double& primal) {
    const VectorXd margins = X.transpose() * theta;
    double hinge = 0.0;
    for (Index mu = 0; mu < n; ++mu) hinge += std::max(0.0, 1.0 - data.y(mu) * margins(mu));
    const double w2 = theta.squaredNorm();
    primal = 0.5 * w2 + C * hinge;
    const double dual = a.sum() - 0.5 * w2;
    return (primal - dual) / std::max(std::abs(primal), 1e-300);
  };

  FitResult r;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    CounterRng rng(seed, static_cast<std::uint64_t>(epoch), 3);
    for (Index i = n - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
    }
    for (Index mu : order) {
      if (qii(mu) == 0.0) {
        a(mu) = C;  // zero sample: dual objective increases linearly in a
        continue;
      }
      const double g = data.y(mu) * X.col(mu).dot(theta) - 1.0;
      const double old = a(mu);
      const double next = std::clamp(old - g / qii(mu), 0.0, C);
      if (next != old) {
        theta += (next - old) * data.y(mu) * X.col(mu);
        a(mu) = next;
      }
    }
    double primal = 0.0;
    const double gap = gap_of(primal);
    if (gap <= tol) {
      r.theta = std::move(theta);
      r.objective = lambda * primal;
      r.grad_norm_or_gap = gap;
      r.iterations = epoch;
      return r;
    }
  }
  fail(ErrorKind::NoConvergence, "hinge dual coordinate ascent did not reach the duality-gap tolerance");
}

inline FitResult fit(LossKind loss, const Dataset& data, double lambda, double tol = 1e-8) {
  switch (loss) {
    case LossKind::Square: return fit_ridge(data, lambda);
    case LossKind::Hinge: return fit_hinge(data, lambda, tol);
    case LossKind::Logistic: return fit_logistic(data, lambda, tol);
  }
  fail(ErrorKind::InvalidArgument, "unknown loss");
}

}  // namespace gul
