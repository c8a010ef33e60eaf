#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "gul/erm.hpp"

using namespace gul;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset gaussian_data(Index p, Index n, std::uint64_t seed) {
  return sample_mixture(MixtureModel::gcm(CovarianceModel::isotropic(1.0, p)), n, seed);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

double golden_section(const std::function<double(double)>& g, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (g(c) < g(d)) b = d;
    else a = c;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(SampleMixture, ZeroCovarianceRepeatsTheMean) {
  VectorXd mu = VectorXd::Constant(4, 3.0);
  const auto model = MixtureModel::create({Cluster{1.0, mu, CovarianceModel::diagonal(VectorXd::Zero(4))}});
  const auto d = sample_mixture(model, 25, 7);
  ASSERT_EQ(d.size(), 25);
  for (Index j = 0; j < d.size(); ++j) EXPECT_EQ(d.X.col(j), mu);
  d.validate();
}

TEST(SampleMixture, Concentration) {
  const Index p = 10, n = 10000;
  VectorXd mu = VectorXd::Zero(p);
  mu(0) = 1.0;
  const auto model = MixtureModel::create({Cluster{1.0, mu, CovarianceModel::isotropic(1.0, p)}});
  const auto d = sample_mixture(model, n, 3);
  const VectorXd mean = d.X.rowwise().mean();
  EXPECT_LE((mean - mu).norm(), 0.05 * std::sqrt(static_cast<double>(p)));
  const MatrixXd centered = d.X.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
  EXPECT_LE((cov - MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(SampleMixture, LabelBalance) {
  const Index n = 2000;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = gaussian_data(3, n, seed);
    if (std::abs(d.y.sum()) / n <= 5.0 / std::sqrt(static_cast<double>(n))) ++ok;
  }
  EXPECT_GE(ok, 99);
}

TEST(SampleMixture, DeterministicAndPrefixStable) {
  const auto a = gaussian_data(5, 40, 11);
  const auto b = gaussian_data(5, 40, 11);
  const auto c = gaussian_data(5, 60, 11);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.X, c.X.leftCols(40));
  EXPECT_NE(a.X, gaussian_data(5, 40, 12).X);
}

TEST(SampleMixture, ClusterFrequencies) {
  VectorXd mu = VectorXd::Zero(2);
  mu(0) = 5.0;
  const auto model = MixtureModel::create({Cluster{0.25, mu, CovarianceModel::isotropic(0.01, 2)},
                                           Cluster{0.75, -mu, CovarianceModel::isotropic(0.01, 2)}});
  const auto d = sample_mixture(model, 20000, 5);
  const double frac = (d.X.row(0).array() > 0.0).cast<double>().mean();
  EXPECT_NEAR(frac, 0.25, 4 * std::sqrt(0.25 * 0.75 / 20000));
}

TEST(RandomFeatures, Examples) {
  const MatrixXd zero = MatrixXd::Zero(6, 3);
  EXPECT_TRUE(random_features(zero, 8, Nonlinearity::Relu, 1).isZero(0.0));
  const MatrixXd z = gaussian_data(6, 30, 2).X * 10.0;
  EXPECT_LE(random_features(z, 50, Nonlinearity::Tanh, 3).cwiseAbs().maxCoeff(), 1.0);
}

TEST(RandomFeatures, ErfVarianceMatchesScalarMonteCarlo) {
  const Index d = 50, p = 20000;
  const MatrixXd z = MatrixXd::Ones(d, 1);  // |z| = sqrt(d)
  const MatrixXd out = random_features(z, p, Nonlinearity::Erf, 9);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / (p - 1);
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  double acc = 0.0;
  const int m = 1000000;
  for (int i = 0; i < m; ++i) {
    const double e = std::erf(nd(gen));
    acc += e * e;
  }
  EXPECT_NEAR(var, acc / m, 0.02);
}

TEST(RandomFeatures, UnknownNonlinearity) {
  EXPECT_EQ(parse_nonlinearity("relu"), Nonlinearity::Relu);
  EXPECT_EQ(kind_of([] { parse_nonlinearity("gelu"); }), ErrorKind::InvalidArgument);
}

TEST(Normalize, PerCoordinateAndGlobal) {
  MatrixXd x(2, 4);
  x << 1, 2, 3, 4, 5, 5, 5, 5;
  MatrixXd a = x;
  normalize_features(a, Normalization::PerCoordinate);
  EXPECT_NEAR(a.row(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(a.row(0).squaredNorm() / 4, 1.0, 1e-14);
  EXPECT_TRUE(a.row(1).isZero(0.0));
  MatrixXd b = x;
  normalize_features(b, Normalization::Global);
  EXPECT_NEAR(b.mean(), 0.0, 1e-15);
  EXPECT_NEAR(b.squaredNorm() / 8, 1.0, 1e-14);
}

TEST(TrainingMetrics, ZeroParameter) {
  const auto d = gaussian_data(4, 30, 1);
  const VectorXd zero = VectorXd::Zero(4);
  EXPECT_DOUBLE_EQ(training_metrics(zero, d, LossKind::Square, 0.3).train_loss, 0.5);
  const auto lg = training_metrics(zero, d, LossKind::Logistic, 0.3);
  EXPECT_NEAR(lg.train_loss, std::log(2.0), 1e-15);
  EXPECT_EQ(lg.zero_one, 1.0);
  EXPECT_EQ(lg.regularized_risk, lg.train_loss);
}

TEST(Ridge, SingleSample) {
  Dataset d;
  d.X = MatrixXd(3, 1);
  d.X << 1.0, -2.0, 0.5;
  d.y = VectorXd::Constant(1, -1.0);
  const double lambda = 0.7;
  const VectorXd want = d.X.col(0) * -1.0 / (lambda + d.X.squaredNorm());
  EXPECT_LE((fit_ridge(d, lambda).theta - want).norm(), 1e-14);
}

TEST(Ridge, HandSolvedTwoByTwo) {
  Dataset d;
  d.X = MatrixXd(2, 3);
  d.X << 1, 0, 1, 0, 1, 1;
  d.y = VectorXd(3);
  d.y << 1, 1, -1;
  const auto r = fit_ridge(d, 0.0);
  EXPECT_LE(r.theta.norm(), 1e-15);
  EXPECT_NEAR(training_metrics(r.theta, d, LossKind::Square, 0.0).train_loss, 0.5, 1e-15);
}

TEST(Ridge, MinimumNormInterpolator) {
  const Index p = 30, n = 15;
  const auto d = gaussian_data(p, n, 4);
  const auto r = fit_ridge(d, 0.0);
  EXPECT_LE((d.X.transpose() * r.theta - d.y).norm(), 1e-8);
  EXPECT_LE(training_metrics(r.theta, d, LossKind::Square, 0.0).train_loss, 1e-16);
  Eigen::FullPivLU<MatrixXd> lu(d.X.transpose());
  const MatrixXd null = lu.kernel();
  ASSERT_EQ(null.cols(), p - n);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    VectorXd c(null.cols());
    for (Index k = 0; k < c.size(); ++k) c(k) = nd(gen);
    const VectorXd other = r.theta + null * c;
    EXPECT_LE((d.X.transpose() * other - d.y).norm(), 1e-8);
    EXPECT_LE(r.theta.norm(), other.norm());
  }
}

TEST(Ridge, PrimalAndDualAgree) {
  for (auto [p, n] : {std::pair<Index, Index>{20, 50}, {50, 20}, {30, 30}}) {
    const auto d = gaussian_data(p, n, static_cast<std::uint64_t>(p * n));
    const auto a = fit_ridge(d, 0.05, RidgeForm::Primal);
    const auto b = fit_ridge(d, 0.05, RidgeForm::Dual);
    EXPECT_LE((a.theta - b.theta).norm(), 1e-10 * a.theta.norm());
    EXPECT_LE(a.grad_norm_or_gap, 1e-10);
  }
}

TEST(Ridge, SingularSystemAtZeroLambda) {
  Dataset d = gaussian_data(3, 8, 6);
  d.X.row(2) = d.X.row(0) + d.X.row(1);
  EXPECT_EQ(kind_of([&] { fit_ridge(d, 0.0); }), ErrorKind::SingularSystem);
  EXPECT_NO_THROW(fit_ridge(d, 0.1));
}

TEST(Logistic, TaylorOracleAtLargeLambda) {
  Dataset d = gaussian_data(5, 40, 7);
  d.y.setOnes();
  const double lambda = 1e3;
  const VectorXd taylor = d.X.rowwise().sum() / (2.0 * lambda * d.size());
  const auto r = fit_logistic(d, lambda);
  const double top = (d.X * d.X.transpose() / static_cast<double>(d.size())).eigenvalues().real().maxCoeff();
  EXPECT_LE((r.theta - taylor).norm(), 10.0 * top / lambda * taylor.norm());
  EXPECT_LE(r.grad_norm_or_gap, 1e-8);
}

TEST(Logistic, PairedDataGivesZero) {
  Dataset d = gaussian_data(4, 10, 8);
  d.X = (MatrixXd(4, 20) << d.X, d.X).finished();
  d.y = (VectorXd(20) << VectorXd::Ones(10), -VectorXd::Ones(10)).finished();
  EXPECT_LE(fit_logistic(d, 0.01).theta.norm(), 1e-12);
}

TEST(Logistic, FiniteDifferenceGradient) {
  const auto d = gaussian_data(6, 25, 9);
  const double lambda = 0.01;
  const auto r = fit_logistic(d, lambda);
  const double h = 1e-5;
  VectorXd fd(6);
  for (Index i = 0; i < 6; ++i) {
    VectorXd a = r.theta, b = r.theta;
    a(i) += h;
    b(i) -= h;
    fd(i) = (regularized_objective(a, d, LossKind::Logistic, lambda) - regularized_objective(b, d, LossKind::Logistic, lambda)) / (2 * h);
  }
  EXPECT_LE(fd.norm(), 1e-8 + 1e-9);
  EXPECT_NEAR(r.objective, regularized_objective(r.theta, d, LossKind::Logistic, lambda), 1e-14);
}

TEST(Hinge, SeparableDataFitsExactly) {
  Dataset d = gaussian_data(10, 30, 10);
  for (Index j = 0; j < d.size(); ++j) {
    d.X(0, j) = d.y(j) * (1.0 + std::abs(d.X(0, j)));
  }
  const auto r = fit_hinge(d, 1e-6);
  EXPECT_LE(training_metrics(r.theta, d, LossKind::Hinge, 0.0).train_loss, 1e-6);
  EXPECT_EQ(training_metrics(r.theta, d, LossKind::Hinge, 0.0).zero_one, 0.0);
}

TEST(Hinge, SingleSampleGoldenSection) {
  Dataset d;
  d.X = MatrixXd(2, 1);
  d.X << 0.6, -0.8;
  d.y = VectorXd::Ones(1);
  for (double lambda : {0.1, 1.0, 5.0}) {
    const double x2 = d.X.squaredNorm();
    const double c = golden_section([&](double c) { return 0.5 * lambda * c * c * x2 + std::max(0.0, 1.0 - c * x2); }, -10.0, 10.0);
    const auto r = fit_hinge(d, lambda);
    EXPECT_LE((r.theta - c * d.X.col(0)).norm(), 1e-6) << lambda;
  }
}

TEST(Hinge, MatchesProjectedSubgradient) {
  const auto d = gaussian_data(5, 30, 12);
  const double lambda = 0.5;
  const auto r = fit_hinge(d, lambda);
  // Subgradient descent with step 1/(lambda t), iterates kept in the ball that
  // contains the minimizer, and the best objective seen.
  const double radius = std::sqrt(2.0 / lambda);
  VectorXd theta = VectorXd::Zero(5);
  double best = regularized_objective(theta, d, LossKind::Hinge, lambda);
  for (int t = 1; t <= 100000; ++t) {
    const VectorXd margins = d.X.transpose() * theta;
    VectorXd g = lambda * theta;
    for (Index mu = 0; mu < d.size(); ++mu) {
      if (d.y(mu) * margins(mu) < 1.0) g -= d.y(mu) * d.X.col(mu) / static_cast<double>(d.size());
    }
    theta -= g / (lambda * t);
    if (theta.norm() > radius) theta *= radius / theta.norm();
    best = std::min(best, regularized_objective(theta, d, LossKind::Hinge, lambda));
  }
  EXPECT_NEAR(regularized_objective(r.theta, d, LossKind::Hinge, lambda), best, 1e-4);
  EXPECT_NEAR(r.objective, regularized_objective(r.theta, d, LossKind::Hinge, lambda), 1e-12);
}

TEST(AllFitters, LocalOptimality) {
  const auto d = gaussian_data(8, 40, 13);
  std::mt19937_64 gen(14);
  std::normal_distribution<double> nd;
  for (LossKind loss : {LossKind::Square, LossKind::Hinge, LossKind::Logistic}) {
    const double lambda = 0.05;
    const auto r = fit(loss, d, lambda);
    const double f0 = regularized_objective(r.theta, d, loss, lambda);
    for (int i = 0; i < 50; ++i) {
      VectorXd dir(8);
      for (Index k = 0; k < 8; ++k) dir(k) = nd(gen);
      EXPECT_LE(f0, regularized_objective(r.theta + 1e-3 * dir.normalized(), d, loss, lambda) + 1e-12) << to_string(loss);
    }
  }
}

TEST(AllFitters, LabelFlipEquivariance) {
  const auto d = gaussian_data(8, 40, 15);
  Dataset flipped = d;
  flipped.y = -d.y;
  for (LossKind loss : {LossKind::Square, LossKind::Hinge, LossKind::Logistic}) {
    const auto a = fit(loss, d, 0.05);
    const auto b = fit(loss, flipped, 0.05);
    EXPECT_LE((a.theta + b.theta).norm(), 1e-10 * a.theta.norm()) << to_string(loss);
  }
}

TEST(AllFitters, RejectBadInputs) {
  Dataset d = gaussian_data(3, 5, 16);
  EXPECT_EQ(kind_of([&] { fit_logistic(d, 0.0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { fit_hinge(d, -1.0); }), ErrorKind::InvalidArgument);
  d.y(2) = 0.5;
  EXPECT_EQ(kind_of([&] { fit_ridge(d, 0.1); }), ErrorKind::InvalidLabel);
}
