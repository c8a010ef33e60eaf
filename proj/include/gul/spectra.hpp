#pragma once

// Gaussian covariate / mixture data models and the matrix-trace side of the
// saddle-point system ("prior channel"): conjugates (m_hat, q_hat, V_hat) per
// cluster go in, order parameters (m, q, V) per cluster come out.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gul/error.hpp"

namespace gul {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Isotropic {
  double scale = 1.0;
  Index dim = 0;
};

/// Diagonal covariance in an orthonormal basis shared by every covariance
/// carrying the same `basis_id`. A null `basis` means canonical coordinates.
struct Spectral {
  VectorXd eigenvalues;
  std::string basis_id = "canonical";
  std::shared_ptr<const MatrixXd> basis;  // columns are eigenvectors
};

struct Dense {
  MatrixXd matrix;
};

class CovarianceModel {
 public:
  using Rep = std::variant<Isotropic, Spectral, Dense>;

  static CovarianceModel isotropic(double scale, Index dim) {
    require(scale > 0.0 && std::isfinite(scale), ErrorKind::InvalidModel,
            "isotropic scale must be positive");
    require(dim > 0, ErrorKind::InvalidModel, "isotropic dimension must be positive");
    return CovarianceModel(Isotropic{scale, dim});
  }

  static CovarianceModel spectral(VectorXd eigenvalues, std::string basis_id = "canonical",
                                  std::shared_ptr<const MatrixXd> basis = nullptr) {
    require(eigenvalues.size() > 0, ErrorKind::InvalidModel, "empty spectrum");
    require(eigenvalues.allFinite() && eigenvalues.minCoeff() >= 0.0, ErrorKind::InvalidModel,
            "spectral eigenvalues must be finite and non-negative");
    if (basis) {
      require(basis->rows() == eigenvalues.size() && basis->cols() == eigenvalues.size(),
              ErrorKind::DimensionMismatch, "basis shape does not match spectrum");
      const MatrixXd gram = basis->transpose() * *basis;
      require((gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8,
              ErrorKind::InvalidModel, "basis is not orthonormal");
    } else {
      require(basis_id == "canonical", ErrorKind::InvalidModel,
              "non-canonical basis_id '" + basis_id + "' needs an explicit basis");
    }
    return CovarianceModel(Spectral{std::move(eigenvalues), std::move(basis_id), std::move(basis)});
  }

  static CovarianceModel diagonal(VectorXd diag) { return spectral(std::move(diag)); }

  static CovarianceModel dense(MatrixXd matrix) {
    require(matrix.rows() == matrix.cols() && matrix.rows() > 0, ErrorKind::DimensionMismatch,
            "dense covariance must be square and non-empty");
    require(matrix.allFinite(), ErrorKind::InvalidModel, "dense covariance has non-finite entries");
    const double norm = matrix.norm();
    const double asym = (matrix - matrix.transpose()).norm();
    require(asym <= 1e-12 * std::max(norm, 1e-300) || asym == 0.0, ErrorKind::InvalidModel,
            "dense covariance is not symmetric");
    MatrixXd sym = 0.5 * (matrix + matrix.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-10 * norm, ErrorKind::InvalidModel,
            "dense covariance is not positive semi-definite");
    return CovarianceModel(Dense{std::move(sym)});
  }

  Index dim() const {
    return std::visit(
        [](const auto& r) -> Index {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Isotropic>) return r.dim;
          else if constexpr (std::is_same_v<T, Spectral>) return r.eigenvalues.size();
          else return r.matrix.rows();
        },
        rep_);
  }

  const Rep& rep() const { return rep_; }
  bool is_dense() const { return std::holds_alternative<Dense>(rep_); }
  bool is_isotropic() const { return std::holds_alternative<Isotropic>(rep_); }

  MatrixXd materialize() const {
    return std::visit(
        [](const auto& r) -> MatrixXd {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Isotropic>) {
            return r.scale * MatrixXd::Identity(r.dim, r.dim);
          } else if constexpr (std::is_same_v<T, Spectral>) {
            if (!r.basis) return r.eigenvalues.asDiagonal();
            return *r.basis * r.eigenvalues.asDiagonal() * r.basis->transpose();
          } else {
            return r.matrix;
          }
        },
        rep_);
  }

  /// Symmetric square root, used by the samplers.
  MatrixXd sqrt_factor() const {
    return std::visit(
        [](const auto& r) -> MatrixXd {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Isotropic>) {
            return std::sqrt(r.scale) * MatrixXd::Identity(r.dim, r.dim);
          } else if constexpr (std::is_same_v<T, Spectral>) {
            const VectorXd s = r.eigenvalues.cwiseSqrt();
            if (!r.basis) return s.asDiagonal();
            return *r.basis * s.asDiagonal() * r.basis->transpose();
          } else {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(r.matrix);
            const VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
          }
        },
        rep_);
  }

  /// Diagonal structure in canonical coordinates (isotropic or spectral without basis).
  bool is_canonical_diagonal() const {
    if (is_isotropic()) return true;
    if (const auto* s = std::get_if<Spectral>(&rep_)) return !s->basis;
    return false;
  }

 private:
  explicit CovarianceModel(Rep rep) : rep_(std::move(rep)) {}
  Rep rep_;
};

struct Cluster {
  double rho = 1.0;
  VectorXd mean;  // may be all-zero
  CovarianceModel cov;
};

class MixtureModel {
 public:
  static MixtureModel create(std::vector<Cluster> clusters) {
    require(!clusters.empty(), ErrorKind::InvalidModel, "mixture needs at least one cluster");
    const Index p = clusters.front().cov.dim();
    double total = 0.0;
    std::vector<std::string> warnings;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      auto& cl = clusters[c];
      require(cl.rho >= 0.0 && cl.rho <= 1.0, ErrorKind::InvalidModel,
              "cluster weight outside [0,1]");
      require(cl.cov.dim() == p, ErrorKind::DimensionMismatch, "clusters disagree on dimension");
      if (cl.mean.size() == 0) cl.mean = VectorXd::Zero(p);
      require(cl.mean.size() == p, ErrorKind::DimensionMismatch,
              "mean length differs from covariance dimension");
      require(cl.mean.allFinite(), ErrorKind::InvalidModel, "non-finite mean");
      const double norm2 = cl.mean.squaredNorm();
      if (norm2 > 10.0 * std::sqrt(static_cast<double>(p))) {
        warnings.push_back("cluster " + std::to_string(c) + ": squared mean norm " +
                           std::to_string(norm2) + " exceeds 10*sqrt(p); outside O(1) mean scaling");
      }
      total += cl.rho;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorKind::InvalidModel, "cluster weights must sum to 1");
    return MixtureModel(std::move(clusters), p, std::move(warnings));
  }

  /// Single centered Gaussian with covariance `cov`.
  static MixtureModel gcm(CovarianceModel cov) {
    const Index p = cov.dim();
    return create({Cluster{1.0, VectorXd::Zero(p), std::move(cov)}});
  }

  Index dim() const { return dim_; }
  std::size_t size() const { return clusters_.size(); }
  const Cluster& cluster(std::size_t c) const { return clusters_[c]; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool zero_means() const {
    return std::all_of(clusters_.begin(), clusters_.end(),
                       [](const Cluster& c) { return c.mean.isZero(0.0); });
  }

  MixtureModel without_means() const {
    auto copy = clusters_;
    for (auto& c : copy) c.mean.setZero();
    return create(std::move(copy));
  }

  std::vector<double> weights() const {
    std::vector<double> w;
    w.reserve(clusters_.size());
    for (const auto& c : clusters_) w.push_back(c.rho);
    return w;
  }

 private:
  MixtureModel(std::vector<Cluster> clusters, Index dim, std::vector<std::string> warnings)
      : clusters_(std::move(clusters)), dim_(dim), warnings_(std::move(warnings)) {}

  std::vector<Cluster> clusters_;
  Index dim_ = 0;
  std::vector<std::string> warnings_;
};

/// Order parameters of one cluster.
struct Overlaps {
  double m = 0.0;
  double q = 0.0;
  double V = 0.0;
};

/// Conjugate parameters of one cluster. V_hat is stored non-negative.
struct Conjugates {
  double m_hat = 0.0;
  double q_hat = 0.0;
  double V_hat = 0.0;
};

/// Precomputed prior channel for a fixed model. When every covariance is
/// diagonal in one shared basis the traces reduce to O(K p) sums; otherwise
/// the resolvent is eigendecomposed once per call and reused for all clusters.
class PriorChannel {
 public:
  static constexpr double kMaxCondition = 1e14;

  explicit PriorChannel(const MixtureModel& model) : dim_(model.dim()), k_(model.size()) {
    const std::string* basis_id = nullptr;
    std::shared_ptr<const MatrixXd> basis;
    bool spectral = true;
    for (const auto& cl : model.clusters()) {
      if (cl.cov.is_dense()) {
        spectral = false;
        break;
      }
      if (const auto* s = std::get_if<Spectral>(&cl.cov.rep())) {
        if (basis_id && *basis_id != s->basis_id) {
          spectral = false;
          break;
        }
        basis_id = &s->basis_id;
        basis = s->basis;
      }
    }
    spectral_ = spectral;
    means_.reserve(k_);
    if (spectral_) {
      eig_.reserve(k_);
      for (const auto& cl : model.clusters()) {
        if (const auto* iso = std::get_if<Isotropic>(&cl.cov.rep())) {
          eig_.push_back(VectorXd::Constant(dim_, iso->scale));
        } else {
          eig_.push_back(std::get<Spectral>(cl.cov.rep()).eigenvalues);
        }
        means_.push_back(basis ? VectorXd(basis->transpose() * cl.mean) : cl.mean);
      }
    } else {
      dense_.reserve(k_);
      for (const auto& cl : model.clusters()) {
        dense_.push_back(cl.cov.materialize());
        means_.push_back(cl.mean);
      }
    }
    for (const auto& mu : means_) has_means_ = has_means_ || !mu.isZero(0.0);
  }

  bool spectral_path() const { return spectral_; }
  Index dim() const { return dim_; }

  std::vector<Overlaps> operator()(std::span<const Conjugates> hats, double lambda) const {
    require(hats.size() == k_, ErrorKind::DimensionMismatch, "conjugates do not match cluster count");
    require(lambda >= 0.0, ErrorKind::InvalidArgument, "lambda must be non-negative");
    for (const auto& h : hats) {
      require(h.V_hat >= 0.0 && std::isfinite(h.V_hat) && std::isfinite(h.q_hat) &&
                  std::isfinite(h.m_hat),
              ErrorKind::InvalidArgument, "conjugates must be finite with V_hat >= 0");
    }
    return spectral_ ? spectral_channel(hats, lambda) : dense_channel(hats, lambda);
  }

 private:
  static void check_condition(double dmin, double dmax) {
    if (!(dmin > 0.0) || dmax / dmin > kMaxCondition) {
      fail(ErrorKind::SingularResolvent,
           "resolvent condition estimate " + std::to_string(dmax / dmin) + " exceeds 1e14");
    }
  }

  std::vector<Overlaps> spectral_channel(std::span<const Conjugates> hats, double lambda) const {
    VectorXd a = VectorXd::Constant(dim_, lambda);
    for (std::size_t c = 0; c < k_; ++c) a += hats[c].V_hat * eig_[c];
    check_condition(a.minCoeff(), a.maxCoeff());
    const VectorXd inv = a.cwiseInverse();
    const VectorXd inv2 = inv.cwiseAbs2();
    const double p = static_cast<double>(dim_);

    // q-bulk: sum_c' q_hat_c' tr(S_c' S_c A^-2) = <S_c, A^-2 * sum_c' q_hat_c' S_c'>
    VectorXd weighted = VectorXd::Zero(dim_);
    for (std::size_t c = 0; c < k_; ++c) weighted += hats[c].q_hat * eig_[c];
    weighted = weighted.cwiseProduct(inv2);

    VectorXd mhat_mu = VectorXd::Zero(dim_);
    if (has_means_) {
      for (std::size_t c = 0; c < k_; ++c) mhat_mu += hats[c].m_hat * means_[c];
    }

    std::vector<Overlaps> out(k_);
    for (std::size_t c = 0; c < k_; ++c) {
      Overlaps& o = out[c];
      o.V = eig_[c].dot(inv) / p;
      o.q = eig_[c].dot(weighted) / p;
      if (has_means_) {
        const double mh = hats[c].m_hat;
        o.q += mh * means_[c].dot(eig_[c].cwiseProduct(inv2).cwiseProduct(mhat_mu)) / p;
        o.m = mh * means_[c].dot(inv.cwiseProduct(mhat_mu)) / p;
      }
    }
    return out;
  }

  std::vector<Overlaps> dense_channel(std::span<const Conjugates> hats, double lambda) const {
    MatrixXd a = lambda * MatrixXd::Identity(dim_, dim_);
    for (std::size_t c = 0; c < k_; ++c) a.noalias() += hats[c].V_hat * dense_[c];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
    require(es.info() == Eigen::Success, ErrorKind::SingularResolvent, "eigendecomposition failed");
    const VectorXd& d = es.eigenvalues();
    check_condition(d.minCoeff(), d.maxCoeff());
    const MatrixXd& u = es.eigenvectors();
    const VectorXd inv = d.cwiseInverse();
    const VectorXd inv2 = inv.cwiseAbs2();
    const double p = static_cast<double>(dim_);

    std::vector<MatrixXd> rotated(k_);
    for (std::size_t c = 0; c < k_; ++c) rotated[c].noalias() = u.transpose() * dense_[c] * u;
    MatrixXd weighted = MatrixXd::Zero(dim_, dim_);
    for (std::size_t c = 0; c < k_; ++c) weighted += hats[c].q_hat * rotated[c];

    VectorXd mhat_mu = VectorXd::Zero(dim_);
    if (has_means_) {
      for (std::size_t c = 0; c < k_; ++c) mhat_mu += hats[c].m_hat * means_[c];
      mhat_mu = u.transpose() * mhat_mu;
    }

    std::vector<Overlaps> out(k_);
    for (std::size_t c = 0; c < k_; ++c) {
      const MatrixXd& b = rotated[c];
      Overlaps& o = out[c];
      o.V = b.diagonal().dot(inv) / p;
      // tr(W B A^-2) with W, B symmetric in the eigenbasis of A.
      o.q = weighted.cwiseProduct(b).rowwise().sum().dot(inv2) / p;
      if (has_means_) {
        const double mh = hats[c].m_hat;
        const VectorXd mu_rot = u.transpose() * means_[c];
        o.q += mh * mu_rot.dot(b * inv2.cwiseProduct(mhat_mu)) / p;
        o.m = mh * mu_rot.dot(inv.cwiseProduct(mhat_mu)) / p;
      }
    }
    return out;
  }

  Index dim_ = 0;
  std::size_t k_ = 0;
  bool spectral_ = true;
  bool has_means_ = false;
  std::vector<VectorXd> eig_;
  std::vector<MatrixXd> dense_;
  std::vector<VectorXd> means_;
};

/// V_c = tr[S_c A^-1]/p, q_c = sum_c' tr[(q_hat_c' S_c' + m_hat_c m_hat_c' mu_c' mu_c^T) S_c A^-2]/p,
/// m_c = sum_c' m_hat_c m_hat_c' mu_c^T A^-1 mu_c' / p, with A = lambda I + sum_c V_hat_c S_c.
inline std::vector<Overlaps> prior_channel(const MixtureModel& model, std::span<const Conjugates> hats,
                                           double lambda) {
  return PriorChannel(model)(hats, lambda);
}

// ---------------------------------------------------------------------------
// Empirical moments and homogeneity diagnostics

struct Moments {
  VectorXd mean;
  MatrixXd cov;
  Index count = 0;
};

struct EmpiricalMoments {
  Moments overall;
  std::map<std::string, Moments> per_class;
};

namespace detail {
inline Moments moments_of(const MatrixXd& data, const std::vector<Index>& cols, const std::string& tag) {
  const Index n = static_cast<Index>(cols.size());
  require(n >= 2, ErrorKind::InsufficientSamples,
          "group '" + tag + "' has " + std::to_string(n) + " samples; need at least 2");
  Moments m;
  m.count = n;
  m.mean = VectorXd::Zero(data.rows());
  for (Index j : cols) m.mean += data.col(j);
  m.mean /= static_cast<double>(n);
  MatrixXd centered(data.rows(), n);
  for (Index k = 0; k < n; ++k) centered.col(k) = data.col(cols[k]) - m.mean;
  m.cov = MatrixXd::Zero(data.rows(), data.rows());
  m.cov.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(n - 1));
  m.cov = m.cov.selfadjointView<Eigen::Lower>();
  return m;
}
}  // namespace detail

/// Unbiased (n-1) mean and covariance of the columns of `data` (p x n). With
/// labels, per-class moments are centered at their own class mean.
inline EmpiricalMoments empirical_moments(const MatrixXd& data,
                                          std::span<const std::string> labels = {}) {
  require(labels.empty() || static_cast<Index>(labels.size()) == data.cols(),
          ErrorKind::DimensionMismatch, "label count differs from sample count");
  EmpiricalMoments out;
  std::vector<Index> all(static_cast<std::size_t>(data.cols()));
  for (Index j = 0; j < data.cols(); ++j) all[static_cast<std::size_t>(j)] = j;
  out.overall = detail::moments_of(data, all, "<all>");
  if (!labels.empty()) {
    std::map<std::string, std::vector<Index>> groups;
    for (Index j = 0; j < data.cols(); ++j) groups[labels[static_cast<std::size_t>(j)]].push_back(j);
    for (const auto& [tag, cols] : groups) out.per_class.emplace(tag, detail::moments_of(data, cols, tag));
  }
  return out;
}

/// Covariance normalized by the outer product of standard deviations; dead
/// coordinates give zero rows and columns.
inline MatrixXd correlation(const MatrixXd& cov) {
  const VectorXd sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  MatrixXd c = MatrixXd::Zero(cov.rows(), cov.cols());
  for (Index j = 0; j < cov.cols(); ++j) {
    if (sd(j) == 0.0) continue;
    for (Index i = 0; i < cov.rows(); ++i) {
      if (sd(i) == 0.0) continue;
      c(i, j) = cov(i, j) / (sd(i) * sd(j));
    }
  }
  return c;
}

inline double relative_frobenius(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

struct HomogeneityPair {
  std::string a;
  std::string b;
  double raw_distance = 0.0;
  double correlation_distance = 0.0;
};

struct HomogeneityReport {
  std::vector<HomogeneityPair> pairs;
  double score = 0.0;      // max correlation distance
  double raw_score = 0.0;  // max raw-covariance distance
};

inline HomogeneityReport homogeneity_report(
    const std::vector<std::pair<std::string, MatrixXd>>& covariances) {
  require(covariances.size() >= 2, ErrorKind::InvalidArgument, "need at least two classes");
  const Index p = covariances.front().second.rows();
  for (const auto& [tag, cov] : covariances) {
    require(cov.rows() == p && cov.cols() == p, ErrorKind::DimensionMismatch,
            "class '" + tag + "' covariance has mismatched shape");
  }
  std::vector<MatrixXd> corr;
  corr.reserve(covariances.size());
  for (const auto& entry : covariances) corr.push_back(correlation(entry.second));

  HomogeneityReport report;
  for (std::size_t i = 0; i < covariances.size(); ++i) {
    for (std::size_t j = i + 1; j < covariances.size(); ++j) {
      HomogeneityPair pr{covariances[i].first, covariances[j].first,
                         relative_frobenius(covariances[i].second, covariances[j].second),
                         relative_frobenius(corr[i], corr[j])};
      report.score = std::max(report.score, pr.correlation_distance);
      report.raw_score = std::max(report.raw_score, pr.raw_distance);
      report.pairs.push_back(std::move(pr));
    }
  }
  return report;
}

inline HomogeneityReport homogeneity_report(const std::map<std::string, Moments>& per_class) {
  std::vector<std::pair<std::string, MatrixXd>> covs;
  for (const auto& [tag, m] : per_class) covs.emplace_back(tag, m.cov);
  return homogeneity_report(covs);
}

}  // namespace gul
