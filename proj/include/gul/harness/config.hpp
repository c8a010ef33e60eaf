#pragma once

// Experiment configuration (JSON). A config names either a synthetic mixture
// model or a data file, plus the sweep: losses x alphas x lambdas, and for
// simulations the dimension p and the number of seeds.
//
//   {
//     "model": {"clusters": [{"weight": 0.5, "mean": {"axis": 0, "value": 3},
//                             "covariance": {"type": "isotropic", "scale": 1}}, ...]},
//     "losses": ["square", "hinge"], "alphas": [0.5, 1, 2], "lambdas": [0.1],
//     "p": 400, "seeds": 10, "seed": 0,
//     "solver": {"tol": 1e-11}, "thresholds": {"max_dev": 0.02, "max_z": 3}
//   }
//
// Covariance types: isotropic {scale}, diagonal {values}, blocks {values}
// (equal consecutive blocks), uniform_spectrum {low, high} (evenly spaced
// quantiles), dense {matrix}. Means: an array, "zero", or {axis, value}.
// Instead of "model", "data": {"path", "labels", "normalization",
// "features": {"p", "nonlinearity", "seed"}} points at a matrix file.

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gul/erm.hpp"
#include "gul/matrix_io.hpp"
#include "gul/replica.hpp"
#include "gul/spectra.hpp"

namespace gul::harness {

using json = nlohmann::json;

struct FeatureMap {
  Index p = 0;
  Nonlinearity nonlinearity = Nonlinearity::Erf;
  std::uint64_t seed = 0;
};

struct DataSource {
  std::string path;
  std::optional<std::string> labels;
  Normalization normalization = Normalization::PerCoordinate;
  std::optional<FeatureMap> features;
};

struct Thresholds {
  double max_dev = 0.02;
  double max_z = 3.0;
};

struct ExperimentConfig {
  std::optional<json> model_spec;  // kept unparsed: the dimension comes from p
  std::optional<DataSource> data;
  std::vector<LossKind> losses;
  std::vector<double> alphas;
  std::vector<double> lambdas;
  Index p = 400;
  int seeds = 1;
  std::uint64_t seed = 0;
  SaddleConfig solver;
  double fit_tol = 1e-8;
  Thresholds thresholds;
  double sample_budget = 1e7;

  void validate() const {
    require(model_spec.has_value() != data.has_value(), ErrorKind::InvalidArgument,
            "config needs exactly one of 'model' or 'data'");
    require(!losses.empty(), ErrorKind::InvalidArgument, "config lists no losses");
    require(!lambdas.empty(), ErrorKind::InvalidArgument, "config lists no lambdas");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      require(alphas[i] > 0.0 && std::isfinite(alphas[i]), ErrorKind::InvalidArgument, "alphas must be positive");
      require(i == 0 || alphas[i] > alphas[i - 1], ErrorKind::InvalidArgument,
              "alphas must be strictly increasing");
    }
    for (double l : lambdas) {
      require(l >= 0.0 && std::isfinite(l), ErrorKind::InvalidArgument, "lambdas must be non-negative");
    }
    require(p > 0, ErrorKind::InvalidArgument, "p must be positive");
    require(seeds > 0, ErrorKind::InvalidArgument, "seeds must be positive");
    if (!alphas.empty()) {
      require(static_cast<double>(p) * alphas.back() <= sample_budget, ErrorKind::InvalidArgument,
              "p * max(alpha) exceeds the sample budget");
    }
    solver.validate();
  }
};

/// Default sweep grid 0.25, 0.5, ..., 6.
inline std::vector<double> default_alpha_grid() {
  std::vector<double> a;
  for (int i = 1; i <= 24; ++i) a.push_back(0.25 * i);
  return a;
}

namespace detail {

inline std::vector<double> number_list(const json& j, const std::string& key) {
  require(j.is_array(), ErrorKind::Parse, "'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    require(v.is_number(), ErrorKind::Parse, "'" + key + "' must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

inline VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline CovarianceModel parse_covariance(const json& j, Index p) {
  require(j.is_object() && j.contains("type"), ErrorKind::Parse, "covariance needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "isotropic") return CovarianceModel::isotropic(j.value("scale", 1.0), p);
  if (type == "diagonal") {
    const auto v = number_list(j.at("values"), "values");
    require(static_cast<Index>(v.size()) == p, ErrorKind::DimensionMismatch,
            "diagonal covariance length differs from p");
    return CovarianceModel::diagonal(to_vector(v));
  }
  if (type == "blocks") {
    const auto v = number_list(j.at("values"), "values");
    const auto k = static_cast<Index>(v.size());
    require(k > 0 && p % k == 0, ErrorKind::DimensionMismatch, "p must be a multiple of the block count");
    VectorXd d(p);
    for (Index i = 0; i < p; ++i) d(i) = v[static_cast<std::size_t>(i / (p / k))];
    return CovarianceModel::diagonal(d);
  }
  if (type == "uniform_spectrum") {
    const double lo = j.at("low").get<double>();
    const double hi = j.at("high").get<double>();
    require(lo >= 0.0 && hi >= lo, ErrorKind::InvalidModel, "uniform_spectrum needs 0 <= low <= high");
    VectorXd d(p);
    for (Index i = 0; i < p; ++i) d(i) = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(p);
    return CovarianceModel::diagonal(d);
  }
  if (type == "dense") {
    const auto& rows = j.at("matrix");
    require(rows.is_array() && static_cast<Index>(rows.size()) == p, ErrorKind::DimensionMismatch,
            "dense covariance must have p rows");
    MatrixXd m(p, p);
    for (Index r = 0; r < p; ++r) {
      const auto row = number_list(rows[static_cast<std::size_t>(r)], "matrix");
      require(static_cast<Index>(row.size()) == p, ErrorKind::DimensionMismatch, "dense covariance must be p x p");
      for (Index c = 0; c < p; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return CovarianceModel::dense(m);
  }
  fail(ErrorKind::Parse, "unknown covariance type '" + type + "'");
}

inline VectorXd parse_mean(const json& j, Index p) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "zero")) return VectorXd::Zero(p);
  if (j.is_array()) {
    const auto v = number_list(j, "mean");
    require(static_cast<Index>(v.size()) == p, ErrorKind::DimensionMismatch, "mean length differs from p");
    return to_vector(v);
  }
  require(j.is_object() && j.contains("axis") && j.contains("value"), ErrorKind::Parse,
          "mean must be an array, \"zero\" or {axis, value}");
  const auto axis = j.at("axis").get<Index>();
  require(axis >= 0 && axis < p, ErrorKind::DimensionMismatch, "mean axis out of range");
  VectorXd m = VectorXd::Zero(p);
  m(axis) = j.at("value").get<double>();
  return m;
}

inline void apply_solver(const json& j, SaddleConfig& s) {
  s.damping = j.value("damping", s.damping);
  s.tol = j.value("tol", s.tol);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.quad_order = j.value("quad_order", s.quad_order);
  s.lambda_floor = j.value("lambda_floor", s.lambda_floor);
  s.anderson_depth = j.value("anderson_depth", s.anderson_depth);
  if (j.contains("quadrature")) {
    const auto q = j.at("quadrature").get<std::string>();
    if (q == "auto") s.quadrature = QuadratureMode::Auto;
    else if (q == "hermite") s.quadrature = QuadratureMode::Hermite;
    else if (q == "split") s.quadrature = QuadratureMode::Split;
    else fail(ErrorKind::Parse, "unknown quadrature '" + q + "'");
  }
}

}  // namespace detail

/// Builds the mixture described by `spec` in dimension p.
inline MixtureModel build_model(const json& spec, Index p) {
  require(spec.is_object() && spec.contains("clusters") && spec.at("clusters").is_array(), ErrorKind::Parse,
          "model needs a 'clusters' array");
  const auto& cl = spec.at("clusters");
  std::vector<Cluster> clusters;
  for (const auto& c : cl) {
    const double w = c.value("weight", 1.0 / static_cast<double>(cl.size()));
    const VectorXd mean = detail::parse_mean(c.contains("mean") ? c.at("mean") : json(), p);
    const json cov = c.contains("covariance") ? c.at("covariance") : json{{"type", "isotropic"}};
    clusters.push_back(Cluster{w, mean, detail::parse_covariance(cov, p)});
  }
  return MixtureModel::create(std::move(clusters));
}

inline ExperimentConfig parse_config(const json& j) {
  try {
    require(j.is_object(), ErrorKind::Parse, "config must be a JSON object");
    ExperimentConfig cfg;
    if (j.contains("model")) cfg.model_spec = j.at("model");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      DataSource src;
      src.path = d.at("path").get<std::string>();
      if (d.contains("labels")) src.labels = d.at("labels").get<std::string>();
      if (d.contains("normalization")) src.normalization = parse_normalization(d.at("normalization").get<std::string>());
      if (d.contains("features")) {
        const auto& f = d.at("features");
        FeatureMap fm;
        fm.p = f.at("p").get<Index>();
        fm.nonlinearity = parse_nonlinearity(f.value("nonlinearity", std::string("erf")));
        fm.seed = f.value("seed", std::uint64_t{0});
        src.features = fm;
      }
      cfg.data = src;
    }
    require(j.contains("losses"), ErrorKind::Parse, "config needs 'losses'");
    for (const auto& l : j.at("losses")) cfg.losses.push_back(parse_loss(l.get<std::string>()));
    if (j.contains("alphas")) {
      cfg.alphas = detail::number_list(j.at("alphas"), "alphas");
    } else if (j.contains("alpha_grid")) {
      const auto& g = j.at("alpha_grid");
      const double start = g.at("start").get<double>();
      const double stop = g.at("stop").get<double>();
      const double step = g.at("step").get<double>();
      require(step > 0.0 && start > 0.0 && stop >= start, ErrorKind::InvalidArgument, "bad alpha_grid");
      const auto count = static_cast<int>(std::floor((stop - start) / step + 1e-9));
      for (int i = 0; i <= count; ++i) cfg.alphas.push_back(start + step * i);
    } else {
      cfg.alphas = default_alpha_grid();
    }
    cfg.lambdas = j.contains("lambdas") ? detail::number_list(j.at("lambdas"), "lambdas") : std::vector<double>{1e-10};
    cfg.p = j.value("p", cfg.p);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.fit_tol = j.value("fit_tol", cfg.fit_tol);
    cfg.sample_budget = j.value("sample_budget", cfg.sample_budget);
    if (j.contains("solver")) detail::apply_solver(j.at("solver"), cfg.solver);
    if (j.contains("thresholds")) {
      cfg.thresholds.max_dev = j.at("thresholds").value("max_dev", cfg.thresholds.max_dev);
      cfg.thresholds.max_z = j.at("thresholds").value("max_z", cfg.thresholds.max_z);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
  return parse_config(j);
}

/// Input matrix of a data source, p x N (samples as columns), after the
/// optional feature map and normalization.
inline MatrixXd load_inputs(const DataSource& src) {
  MatrixXd X = io::read_matrix(src.path).transpose();
  normalize_features(X, src.normalization);
  if (src.features) X = random_features(X, src.features->p, src.features->nonlinearity, src.features->seed);
  return X;
}

/// Theory model for a data source: per-class Gaussian clusters when a label
/// file is given (weights = class frequencies), otherwise a single Gaussian
/// with the empirical covariance. Means are kept relative to the grand mean.
inline MixtureModel data_model(const DataSource& src, const MatrixXd& X) {
  std::vector<std::string> tags;
  if (src.labels) {
    tags = io::read_labels(*src.labels);
    require(static_cast<Index>(tags.size()) == X.cols(), ErrorKind::DimensionMismatch,
            "label file length differs from sample count");
  }
  const auto em = empirical_moments(X, tags);
  if (em.per_class.empty()) {
    return MixtureModel::gcm(CovarianceModel::dense(em.overall.cov));
  }
  std::vector<Cluster> clusters;
  const double n = static_cast<double>(X.cols());
  for (const auto& [tag, m] : em.per_class) {
    clusters.push_back(Cluster{static_cast<double>(m.count) / n, m.mean - em.overall.mean,
                               CovarianceModel::dense(m.cov)});
  }
  double total = 0.0;
  for (const auto& c : clusters) total += c.rho;
  for (auto& c : clusters) c.rho /= total;
  return MixtureModel::create(std::move(clusters));
}

}  // namespace gul::harness
