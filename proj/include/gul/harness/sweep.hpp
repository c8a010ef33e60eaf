#pragma once

#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gul/erm.hpp"
#include "gul/harness/config.hpp"
#include "gul/harness/curve.hpp"
#include "gul/harness/pool.hpp"
#include "gul/replica.hpp"

namespace gul::harness {

/// Per-point failure kept next to the curve; sweeps never abort on these.
struct PointFailure {
  LossKind loss;
  double alpha;
  double lambda;
  std::string message;
  bool numerical = true;
};

struct SweepResult {
  LearningCurve curve;
  std::vector<PointFailure> failures;
};

/// n = round(alpha p) with ties to even.
inline Index sample_count(double alpha, Index p) {
  return static_cast<Index>(std::nearbyint(alpha * static_cast<double>(p)));
}

/// Theory model of a config: the configured mixture in dimension p, or the
/// moment-matched mixture of a data file.
inline MixtureModel theory_model(const ExperimentConfig& cfg) {
  if (cfg.model_spec) return build_model(*cfg.model_spec, cfg.p);
  const MatrixXd X = load_inputs(*cfg.data);
  return data_model(*cfg.data, X);
}

/// One saddle-point solve per (loss, lambda, alpha). Each (loss, lambda) chain
/// walks alpha upward, starting every solve from the previous fixed point.
inline SweepResult run_predict(const ExperimentConfig& cfg, unsigned workers = worker_count()) {
  cfg.validate();
  SweepResult out;
  if (cfg.alphas.empty()) return out;
  const MixtureModel model = theory_model(cfg);
  struct Chain {
    LossKind loss;
    double lambda;
    std::vector<CurveRow> rows;
    std::vector<PointFailure> failures;
  };
  std::vector<Chain> chains;
  for (LossKind l : cfg.losses) {
    for (double lam : cfg.lambdas) chains.push_back(Chain{l, lam, {}, {}});
  }
  parallel_for(chains.size(), workers, [&](std::size_t i) {
    Chain& ch = chains[i];
    SaddleConfig sc = cfg.solver;
    for (double alpha : cfg.alphas) {
      CurveRow row;
      row.loss = ch.loss;
      row.alpha = alpha;
      row.lambda = ch.lambda;
      row.source = Source::Theory;
      row.n_seeds = 0;
      try {
        const auto sol = solve_saddle(model, ch.loss, alpha, ch.lambda, sc);
        row.mean_loss = sol.training_loss;
        row.mean_01 = sol.loss01;
        sc.init = sol.state;
      } catch (const Error& e) {
        row.mean_loss = std::numeric_limits<double>::quiet_NaN();
        row.mean_01 = std::numeric_limits<double>::quiet_NaN();
        row.converged = false;
        ch.failures.push_back({ch.loss, alpha, ch.lambda, e.what(), e.numerical()});
      }
      ch.rows.push_back(row);
    }
  });
  for (auto& ch : chains) {
    out.curve.rows.insert(out.curve.rows.end(), ch.rows.begin(), ch.rows.end());
    out.failures.insert(out.failures.end(), ch.failures.begin(), ch.failures.end());
  }
  out.curve.sort();
  return out;
}

namespace detail {

struct SeedOutcome {
  bool ok = false;
  double loss = 0.0;
  double err01 = 0.0;
  std::string message;
  bool numerical = true;
};

inline void mean_stderr(const std::vector<double>& v, double& mean, std::optional<double>& se) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  se.reset();
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
}

}  // namespace detail

/// ERM simulations: for every (loss, alpha, lambda, seed) draw n = round(alpha p)
/// samples, fit, and record the training metrics; rows hold the mean and
/// standard error over the seeds that succeeded.
inline SweepResult run_simulate(const ExperimentConfig& cfg, unsigned workers = worker_count()) {
  cfg.validate();
  SweepResult out;
  if (cfg.alphas.empty()) return out;

  std::optional<MixtureModel> model;
  MatrixXd pool_inputs;
  if (cfg.model_spec) model = build_model(*cfg.model_spec, cfg.p);
  else pool_inputs = load_inputs(*cfg.data);

  struct Task {
    LossKind loss;
    double alpha;
    double lambda;
    int seed_index;
  };
  std::vector<Task> tasks;
  for (LossKind l : cfg.losses) {
    for (double a : cfg.alphas) {
      for (double lam : cfg.lambdas) {
        for (int s = 0; s < cfg.seeds; ++s) tasks.push_back({l, a, lam, s});
      }
    }
  }
  std::vector<detail::SeedOutcome> results(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    auto& r = results[i];
    // Datasets depend on (seed, alpha) only, so all losses and lambdas at one
    // alpha see the same samples.
    const std::uint64_t seed = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(t.seed_index))) ^
                               std::bit_cast<std::uint64_t>(t.alpha);
    try {
      Dataset d;
      if (model) {
        d = sample_mixture(*model, sample_count(t.alpha, cfg.p), seed);
      } else {
        const Index n = sample_count(t.alpha, pool_inputs.rows());
        require(n >= 1 && n <= pool_inputs.cols(), ErrorKind::InsufficientSamples,
                "data file has " + std::to_string(pool_inputs.cols()) + " samples, need " + std::to_string(n));
        std::vector<Index> perm(static_cast<std::size_t>(pool_inputs.cols()));
        std::iota(perm.begin(), perm.end(), Index{0});
        CounterRng rng(seed, 0, 4);
        for (Index k = 0; k < n; ++k) {
          const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool_inputs.cols() - k)));
          std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
        }
        d.X.resize(pool_inputs.rows(), n);
        for (Index k = 0; k < n; ++k) d.X.col(k) = pool_inputs.col(perm[static_cast<std::size_t>(k)]);
        d.y = rademacher_labels(n, seed);
        d.provenance = cfg.data->path + " (seed=" + std::to_string(seed) + ", normalization=" +
                       to_string(cfg.data->normalization) + ")";
      }
      const auto fitres = fit(t.loss, d, t.lambda, cfg.fit_tol);
      const auto m = training_metrics(fitres.theta, d, t.loss, t.lambda);
      r.ok = true;
      r.loss = m.train_loss;
      r.err01 = m.zero_one;
    } catch (const Error& e) {
      r.message = e.what();
      r.numerical = e.numerical();
    }
  });

  for (std::size_t start = 0; start < tasks.size(); start += static_cast<std::size_t>(cfg.seeds)) {
    const Task& t = tasks[start];
    CurveRow row;
    row.loss = t.loss;
    row.alpha = t.alpha;
    row.lambda = t.lambda;
    row.source = Source::Simulation;
    std::vector<double> losses, errs;
    for (int s = 0; s < cfg.seeds; ++s) {
      const auto& r = results[start + static_cast<std::size_t>(s)];
      if (r.ok) {
        losses.push_back(r.loss);
        errs.push_back(r.err01);
      } else {
        out.failures.push_back({t.loss, t.alpha, t.lambda, "seed " + std::to_string(s) + ": " + r.message,
                                r.numerical});
      }
    }
    row.n_seeds = static_cast<int>(losses.size());
    row.converged = row.n_seeds == cfg.seeds;
    if (losses.empty()) {
      row.mean_loss = row.mean_01 = std::numeric_limits<double>::quiet_NaN();
    } else {
      detail::mean_stderr(losses, row.mean_loss, row.stderr_loss);
      detail::mean_stderr(errs, row.mean_01, row.stderr_01);
    }
    out.curve.rows.push_back(row);
  }
  out.curve.sort();
  return out;
}

}  // namespace gul::harness
