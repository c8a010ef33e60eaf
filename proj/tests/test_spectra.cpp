#include <gtest/gtest.h>

#include <random>

#include "gul/erm.hpp"
#include "gul/spectra.hpp"

using namespace gul;

namespace {

VectorXd blocks(Index p, double a, double b, double c) {
  VectorXd v(p);
  for (Index i = 0; i < p; ++i) v(i) = i < p / 3 ? a : (i < 2 * p / 3 ? b : c);
  return v;
}

// Brute force: form A, invert it, take traces of explicit products.
std::vector<Overlaps> dense_oracle(const std::vector<MatrixXd>& sigma, const std::vector<VectorXd>& mu,
                                   const std::vector<Conjugates>& hats, double lambda) {
  const Index p = sigma[0].rows();
  MatrixXd A = lambda * MatrixXd::Identity(p, p);
  for (std::size_t c = 0; c < sigma.size(); ++c) A += hats[c].V_hat * sigma[c];
  const MatrixXd Ai = A.inverse();
  const MatrixXd Ai2 = Ai * Ai;
  std::vector<Overlaps> out(sigma.size());
  for (std::size_t c = 0; c < sigma.size(); ++c) {
    out[c].V = (sigma[c] * Ai).trace() / p;
    double q = 0.0, m = 0.0;
    for (std::size_t d = 0; d < sigma.size(); ++d) {
      const MatrixXd inner = hats[d].q_hat * sigma[d] + hats[c].m_hat * hats[d].m_hat * mu[d] * mu[c].transpose();
      q += (inner * sigma[c] * Ai2).trace() / p;
      m += hats[c].m_hat * hats[d].m_hat * mu[c].dot(Ai * mu[d]) / p;
    }
    out[c].q = q;
    out[c].m = m;
  }
  return out;
}

}  // namespace

TEST(CovarianceModel, ValidatesInputs) {
  EXPECT_THROW(CovarianceModel::isotropic(0.0, 3), Error);
  MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  EXPECT_THROW(CovarianceModel::dense(asym), Error);
  MatrixXd indef(2, 2);
  indef << 1, 2, 2, 1;
  EXPECT_THROW(CovarianceModel::dense(indef), Error);
  EXPECT_THROW(CovarianceModel::spectral(VectorXd::Constant(3, -1.0)), Error);
}

TEST(MixtureModel, ChecksWeightsAndDimensions) {
  auto cov = CovarianceModel::isotropic(1.0, 4);
  EXPECT_THROW(MixtureModel::create({Cluster{0.5, VectorXd::Zero(4), cov}, Cluster{0.4, VectorXd::Zero(4), cov}}),
               Error);
  EXPECT_THROW(MixtureModel::create({Cluster{1.0, VectorXd::Zero(3), cov}}), Error);
  try {
    MixtureModel::create({Cluster{0.5, VectorXd::Zero(4), cov}, Cluster{0.5, VectorXd::Zero(4), CovarianceModel::isotropic(1.0, 5)}});
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(MixtureModel, LargeMeanWarnsButIsAccepted) {
  const Index p = 16;
  VectorXd mu = VectorXd::Zero(p);
  mu(0) = 10.0;  // |mu|^2 = 100 > 10 sqrt(16) = 40
  auto m = MixtureModel::create({Cluster{1.0, mu, CovarianceModel::isotropic(1.0, p)}});
  EXPECT_EQ(m.warnings().size(), 1u);
  mu(0) = 2.0;
  EXPECT_TRUE(MixtureModel::create({Cluster{1.0, mu, CovarianceModel::isotropic(1.0, p)}}).warnings().empty());
}

TEST(PriorChannel, IsotropicScalarClosedForm) {
  const Index p = 50;
  auto model = MixtureModel::gcm(CovarianceModel::isotropic(1.0, p));
  const double lambda = 0.3, qh = 0.7, vh = 1.9;
  const std::vector<Conjugates> hats{{0.0, qh, vh}};
  const auto out = prior_channel(model, hats, lambda);
  EXPECT_NEAR(out[0].V, 1.0 / (lambda + vh), 1e-12 / (lambda + vh));
  EXPECT_NEAR(out[0].q, qh / ((lambda + vh) * (lambda + vh)), 1e-12);
  EXPECT_EQ(out[0].m, 0.0);
}

TEST(PriorChannel, RidgelessGcmFixedPoint) {
  const double alpha = 3.0;
  auto model = MixtureModel::gcm(CovarianceModel::isotropic(1.0, 20));
  const std::vector<Conjugates> hats{{0.0, alpha - 1.0, alpha - 1.0}};
  const auto out = prior_channel(model, hats, 1e-14);
  EXPECT_NEAR(out[0].V, 1.0 / (alpha - 1.0), 1e-12);
  EXPECT_NEAR(out[0].q, 1.0 / (alpha - 1.0), 1e-12);
}

TEST(PriorChannel, ScaledIsotropicMatchesSpectral) {
  const Index p = 30;
  auto iso = MixtureModel::gcm(CovarianceModel::isotropic(2.5, p));
  auto spec = MixtureModel::gcm(CovarianceModel::spectral(VectorXd::Constant(p, 2.5)));
  const std::vector<Conjugates> hats{{0.0, 1.3, 0.8}};
  const auto a = prior_channel(iso, hats, 0.2);
  const auto b = prior_channel(spec, hats, 0.2);
  EXPECT_DOUBLE_EQ(a[0].V, b[0].V);
  EXPECT_DOUBLE_EQ(a[0].q, b[0].q);
}

TEST(PriorChannel, BlockMixtureMatchesDenseOracle) {
  const Index p = 30;
  const VectorXd d1 = blocks(p, 0.01, 0.98, 0.01), d2 = blocks(p, 0.495, 0.01, 0.495);
  auto model = MixtureModel::create({Cluster{0.5, VectorXd::Zero(p), CovarianceModel::dense(MatrixXd(d1.asDiagonal()))},
                                     Cluster{0.5, VectorXd::Zero(p), CovarianceModel::dense(MatrixXd(d2.asDiagonal()))}});
  const std::vector<Conjugates> hats{{0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}};
  const auto got = prior_channel(model, hats, 0.1);
  const auto want = dense_oracle({d1.asDiagonal(), d2.asDiagonal()}, {VectorXd::Zero(p), VectorXd::Zero(p)}, hats, 0.1);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(got[c].V, want[c].V, 1e-12 * std::abs(want[c].V));
    EXPECT_NEAR(got[c].q, want[c].q, 1e-12 * std::abs(want[c].q));
    EXPECT_EQ(got[c].m, 0.0);
  }
}

TEST(PriorChannel, GeneralDenseWithMeansMatchesOracle) {
  const Index p = 12;
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  std::vector<MatrixXd> sig;
  std::vector<VectorXd> mu;
  std::vector<Cluster> clusters;
  for (int c = 0; c < 3; ++c) {
    MatrixXd g(p, p);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(gen);
    MatrixXd s = g * g.transpose() / p + 0.1 * MatrixXd::Identity(p, p);
    VectorXd m(p);
    for (Index i = 0; i < p; ++i) m(i) = nd(gen) / std::sqrt(static_cast<double>(p));
    sig.push_back(s);
    mu.push_back(m);
    clusters.push_back(Cluster{0.2 + 0.1 * c, m, CovarianceModel::dense(s)});
  }
  clusters[2].rho = 0.5;
  auto model = MixtureModel::create(clusters);
  const std::vector<Conjugates> hats{{0.4, 1.1, 0.7}, {-0.2, 0.5, 1.3}, {0.9, 2.0, 0.3}};
  const auto got = prior_channel(model, hats, 0.05);
  const auto want = dense_oracle(sig, mu, hats, 0.05);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(got[c].V, want[c].V, 1e-10 * std::abs(want[c].V));
    EXPECT_NEAR(got[c].q, want[c].q, 1e-10 * std::abs(want[c].q));
    EXPECT_NEAR(got[c].m, want[c].m, 1e-10 * std::max(1.0, std::abs(want[c].m)));
  }
}

TEST(PriorChannel, SpectralAndDenseAgree) {
  const Index p = 40;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(0.2, 3.0);
  VectorXd e1(p), e2(p);
  for (Index i = 0; i < p; ++i) {
    e1(i) = ud(gen);
    e2(i) = ud(gen);
  }
  VectorXd mu = VectorXd::Zero(p);
  mu(3) = 1.2;
  auto spectral = MixtureModel::create({Cluster{0.3, mu, CovarianceModel::diagonal(e1)}, Cluster{0.7, -mu, CovarianceModel::diagonal(e2)}});
  auto dense = MixtureModel::create({Cluster{0.3, mu, CovarianceModel::dense(MatrixXd(e1.asDiagonal()))},
                                     Cluster{0.7, -mu, CovarianceModel::dense(MatrixXd(e2.asDiagonal()))}});
  ASSERT_TRUE(PriorChannel(spectral).spectral_path());
  ASSERT_FALSE(PriorChannel(dense).spectral_path());
  const std::vector<Conjugates> hats{{0.3, 0.8, 1.1}, {-0.6, 1.7, 0.4}};
  const auto a = prior_channel(spectral, hats, 0.07);
  const auto b = prior_channel(dense, hats, 0.07);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(a[c].V, b[c].V, 1e-10 * std::abs(b[c].V));
    EXPECT_NEAR(a[c].q, b[c].q, 1e-10 * std::abs(b[c].q));
    EXPECT_NEAR(a[c].m, b[c].m, 1e-10 * std::abs(b[c].m));
  }
}

TEST(PriorChannel, SharedRotatedBasisUsesSpectralPath) {
  const Index p = 10;
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  MatrixXd g(p, p);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(gen);
  auto basis = std::make_shared<const MatrixXd>(Eigen::HouseholderQR<MatrixXd>(g).householderQ() * MatrixXd::Identity(p, p));
  VectorXd e1 = VectorXd::LinSpaced(p, 0.5, 2.0), e2 = VectorXd::LinSpaced(p, 2.0, 0.1);
  VectorXd mu = VectorXd::Zero(p);
  mu(0) = 1.0;
  auto rotated = MixtureModel::create({Cluster{0.5, mu, CovarianceModel::spectral(e1, "Q", basis)},
                                       Cluster{0.5, -mu, CovarianceModel::spectral(e2, "Q", basis)}});
  ASSERT_TRUE(PriorChannel(rotated).spectral_path());
  const MatrixXd s1 = *basis * e1.asDiagonal() * basis->transpose();
  const MatrixXd s2 = *basis * e2.asDiagonal() * basis->transpose();
  const std::vector<Conjugates> hats{{0.5, 1.0, 0.9}, {0.2, 0.6, 1.4}};
  const auto got = prior_channel(rotated, hats, 0.1);
  const auto want = dense_oracle({s1, s2}, {mu, -mu}, hats, 0.1);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(got[c].V, want[c].V, 1e-10 * std::abs(want[c].V));
    EXPECT_NEAR(got[c].q, want[c].q, 1e-10 * std::abs(want[c].q));
    EXPECT_NEAR(got[c].m, want[c].m, 1e-10 * std::abs(want[c].m));
  }
}

TEST(PriorChannel, MismatchedBasisFallsBackToDense) {
  const Index p = 6;
  auto basis = std::make_shared<const MatrixXd>(MatrixXd::Identity(p, p).rowwise().reverse());
  auto model = MixtureModel::create({Cluster{0.5, {}, CovarianceModel::diagonal(VectorXd::LinSpaced(p, 1, 2))},
                                     Cluster{0.5, {}, CovarianceModel::spectral(VectorXd::LinSpaced(p, 1, 3), "flip", basis)}});
  EXPECT_FALSE(PriorChannel(model).spectral_path());
}

TEST(PriorChannel, ZeroMeanHatsGiveZeroM) {
  const Index p = 8;
  VectorXd mu = VectorXd::Ones(p);
  auto model = MixtureModel::create({Cluster{0.5, mu, CovarianceModel::isotropic(1.0, p)}, Cluster{0.5, -mu, CovarianceModel::isotropic(2.0, p)}});
  const std::vector<Conjugates> hats{{0.0, 1.0, 1.0}, {0.0, 2.0, 0.5}};
  for (const auto& o : prior_channel(model, hats, 0.1)) EXPECT_EQ(o.m, 0.0);
}

TEST(PriorChannel, HomogeneousInScale) {
  const Index p = 25;
  auto model = MixtureModel::create({Cluster{0.4, {}, CovarianceModel::diagonal(VectorXd::LinSpaced(p, 0.1, 3.0))},
                                     Cluster{0.6, {}, CovarianceModel::diagonal(VectorXd::LinSpaced(p, 2.0, 0.5))}});
  const std::vector<Conjugates> hats{{0.0, 1.0, 0.8}, {0.0, 0.5, 1.6}};
  const auto base = prior_channel(model, hats, 0.3);
  for (double t : {0.5, 2.0}) {
    std::vector<Conjugates> scaled = hats;
    for (auto& h : scaled) h.V_hat *= t;
    const auto out = prior_channel(model, scaled, 0.3 * t);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(out[c].V, base[c].V / t, 1e-12 * base[c].V / t);
  }
}

TEST(PriorChannel, SingularResolventIsReported) {
  VectorXd e = VectorXd::Ones(5);
  e(2) = 0.0;
  auto model = MixtureModel::gcm(CovarianceModel::dense(MatrixXd(e.asDiagonal())));
  const std::vector<Conjugates> hats{{0.0, 1.0, 1.0}};
  try {
    prior_channel(model, hats, 0.0);
    FAIL() << "expected SingularResolvent";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::SingularResolvent);
  }
}

TEST(EmpiricalMoments, TwoPointSymmetric) {
  MatrixXd x(2, 2);
  x << 1, -1, 0, 0;
  const auto m = empirical_moments(x);
  EXPECT_TRUE(m.overall.mean.isZero(0.0));
  EXPECT_DOUBLE_EQ(m.overall.cov(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.overall.cov(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(m.overall.cov(0, 1), 0.0);
}

TEST(EmpiricalMoments, RepeatedVectorHasZeroCovariance) {
  MatrixXd x = VectorXd::LinSpaced(4, 1, 4).replicate(1, 7);
  EXPECT_TRUE(empirical_moments(x).overall.cov.isZero(1e-14));
}

TEST(EmpiricalMoments, MonteCarloCovariance) {
  VectorXd d(2);
  d << 2.0, 1.0;
  auto data = sample_mixture(MixtureModel::gcm(CovarianceModel::diagonal(d)), 10000, 42);
  const auto m = empirical_moments(data.X);
  MatrixXd want = d.asDiagonal();
  EXPECT_LT((m.overall.cov - want).cwiseAbs().maxCoeff(), 0.1);
}

TEST(EmpiricalMoments, PerClassAndInsufficientSamples) {
  MatrixXd x(1, 5);
  x << 0, 1, 2, 10, 12;
  const std::vector<std::string> tags{"a", "a", "a", "b", "b"};
  const auto m = empirical_moments(x, tags);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_DOUBLE_EQ(m.per_class.at("a").mean(0), 1.0);
  EXPECT_DOUBLE_EQ(m.per_class.at("b").cov(0, 0), 2.0);
  const std::vector<std::string> lonely{"a", "a", "a", "a", "b"};
  try {
    empirical_moments(x, lonely);
    FAIL() << "expected InsufficientSamples";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientSamples);
  }
}

TEST(Homogeneity, IdenticalAndScaledCovariances) {
  MatrixXd a = MatrixXd::Identity(2, 2);
  MatrixXd b(2, 2);
  b << 1, 0, 0, 4;
  const auto same = homogeneity_report({{"x", a}, {"y", a}});
  EXPECT_EQ(same.score, 0.0);
  EXPECT_EQ(same.raw_score, 0.0);
  const auto scaled = homogeneity_report({{"x", a}, {"y", b}});
  EXPECT_EQ(scaled.score, 0.0);
  EXPECT_GT(scaled.raw_score, 0.0);
}

TEST(Homogeneity, BlockPairRawVersusCorrelation) {
  VectorXd d1(3), d2(3);
  d1 << 0.01, 0.98, 0.01;
  d2 << 0.495, 0.01, 0.495;
  const auto rep = homogeneity_report({{"one", MatrixXd(d1.asDiagonal())}, {"two", MatrixXd(d2.asDiagonal())}});
  ASSERT_EQ(rep.pairs.size(), 1u);
  EXPECT_NEAR(rep.pairs[0].correlation_distance, 0.0, 1e-15);
  // |d1 - d2| / max(|d1|, |d2|) from the diagonals directly.
  const double diff = std::sqrt(2 * 0.485 * 0.485 + 0.97 * 0.97);
  const double scale = std::max(d1.norm(), d2.norm());
  EXPECT_NEAR(rep.pairs[0].raw_distance, diff / scale, 1e-14);
  EXPECT_NEAR(rep.pairs[0].raw_distance, 1.2122, 1e-4);
}

TEST(Homogeneity, DeadCoordinatesGiveZeroNotNan) {
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 2.0;
  const MatrixXd c = correlation(a);
  EXPECT_TRUE(c.allFinite());
  EXPECT_EQ(c(2, 2), 0.0);
  EXPECT_NEAR(c(1, 1), 1.0, 1e-15);
}

TEST(Homogeneity, ShapeMismatch) {
  try {
    homogeneity_report({{"a", MatrixXd::Identity(2, 2)}, {"b", MatrixXd::Identity(3, 3)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}
