#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "swipeguard/model_shrunk.hpp"

using namespace swipeguard;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SampleSet normal_samples(int n, int d, std::mt19937_64& rng, const MatrixXd& cov) {
  SampleSet s;
  for (int i = 0; i < n; ++i) s.push_back(oracle::mvn_draw(VectorXd::Zero(d), cov, rng));
  return s;
}

}  // namespace

TEST(Shrunk, AlphaZeroGivesDiagonalCovariance) {
  std::mt19937_64 rng(1);
  MatrixXd c(3, 3);
  c << 1, 0.7, 0.2, 0.7, 1, 0.1, 0.2, 0.1, 1;
  const auto m = train_shrunk(normal_samples(20, 3, rng, c), 0.0);
  const MatrixXd& cov = m.gaussian().cov;
  EXPECT_EQ(MatrixXd(cov.diagonal().asDiagonal()), cov);
  EXPECT_EQ(m.alpha(), 0.0);
}

TEST(Shrunk, IdenticalSamplesAreSingular) {
  const SampleSet s(2, Eigen::Vector2d(1.0, 2.0));
  EXPECT_THROW(train_shrunk(s, 0.5), SingularModelError);
  EXPECT_THROW(train_shrunk(SampleSet{Eigen::Vector2d(1, 2)}), DimensionError);
}

TEST(Shrunk, NearPointScoresHigherThanFarPoint) {
  std::mt19937_64 rng(3);
  const auto m = train_shrunk(normal_samples(10, 2, rng, MatrixXd::Identity(2, 2)), 0.5);
  EXPECT_GT(m.score(VectorXd::Zero(2)), m.score(Eigen::Vector2d(5.0, 5.0)));
}

TEST(Shrunk, MeanIsTheMaximum) {
  std::mt19937_64 rng(4);
  const auto m = train_shrunk(normal_samples(15, 4, rng, MatrixXd::Identity(4, 4)), 0.7);
  const VectorXd& mu = m.gaussian().mean;
  const double top = m.score(mu);
  std::normal_distribution<double> z(0.0, 0.3);
  for (int k = 0; k < 100; ++k) {
    VectorXd x = mu;
    for (int i = 0; i < 4; ++i) x[i] += z(rng);
    EXPECT_LT(m.score(x), top);
  }
}

TEST(Shrunk, ScoreDifferenceIsHalfMahalanobisDifference) {
  std::mt19937_64 rng(5);
  const auto m = train_shrunk(normal_samples(12, 3, rng, MatrixXd::Identity(3, 3)), 0.4);
  for (int k = 0; k < 20; ++k) {
    const VectorXd a = oracle::mvn_draw(VectorXd::Zero(3), MatrixXd::Identity(3, 3), rng);
    const VectorXd b = oracle::mvn_draw(VectorXd::Zero(3), MatrixXd::Identity(3, 3), rng);
    EXPECT_NEAR(m.score(a) - m.score(b), -0.5 * (m.mahalanobis_sq(a) - m.mahalanobis_sq(b)), 1e-10);
  }
}

TEST(Shrunk, MatchesHandAssembledOracle) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 2 + rep % 4;
    const double alpha = 0.1 * (rep % 11);
    const SampleSet s = normal_samples(3 * d + 2, d, rng, MatrixXd::Identity(d, d));
    // Oracle: sample mean, divisor-N covariance, off-diagonal scaled by alpha.
    VectorXd mean = VectorXd::Zero(d);
    for (const auto& x : s) mean += x;
    mean /= static_cast<double>(s.size());
    MatrixXd cov = MatrixXd::Zero(d, d);
    for (const auto& x : s) cov += (x - mean) * (x - mean).transpose();
    cov /= static_cast<double>(s.size());
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (i != j) cov(i, j) *= alpha;
      }
    }
    const auto m = train_shrunk(s, alpha);
    for (int k = 0; k < 5; ++k) {
      const VectorXd x = oracle::mvn_draw(VectorXd::Zero(d), MatrixXd::Identity(d, d), rng);
      EXPECT_NEAR(m.score(x), oracle::gaussian_logpdf(mean, cov, x), 1e-10);
    }
  }
}

TEST(Shrunk, AlphaOneEqualsMleGaussian) {
  std::mt19937_64 rng(7);
  const SampleSet s = normal_samples(25, 3, rng, MatrixXd::Identity(3, 3));
  const auto m = train_shrunk(s, 1.0);
  const GaussianParams mle = mle_cov(s);
  for (const auto& x : s) EXPECT_NEAR(m.score(x), gaussian_logpdf(mle, x), 1e-12);
}

TEST(Shrunk, ScoreDecreasesAlongRayFromMean) {
  std::mt19937_64 rng(8);
  const auto m = train_shrunk(normal_samples(20, 3, rng, MatrixXd::Identity(3, 3)), 0.5);
  const VectorXd dir = Eigen::Vector3d(0.3, -1.0, 0.6).normalized();
  double prev = m.score(m.gaussian().mean);
  for (double r = 0.1; r < 10.0; r += 0.1) {
    const double s = m.score(m.gaussian().mean + r * dir);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(Shrunk, RankDeficientCovarianceIsRescuedByJitter) {
  // Two points in two dimensions: the full covariance is rank one.
  const SampleSet s{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 2.0)};
  const auto m = train_shrunk(s, 1.0);
  EXPECT_EQ(m.alpha(), 1.0);
  EXPECT_NEAR(m.gaussian().cov(0, 1), 0.5, 1e-15);
  EXPECT_TRUE(std::isfinite(m.score(Eigen::Vector2d(0.5, 1.0))));
  EXPECT_LT(m.score(Eigen::Vector2d(1.0, 0.0)), m.score(Eigen::Vector2d(0.5, 1.0)));
}

TEST(Shrunk, CrossValidatedAlphaAndTrainingLikelihoods) {
  std::mt19937_64 rng(9);
  MatrixXd c(2, 2);
  c << 1.0, 0.95, 0.95, 1.0;
  const SampleSet s = normal_samples(60, 2, rng, c);
  const auto m = train_shrunk(s);
  EXPECT_EQ(m.alpha(), 1.0);
  ASSERT_EQ(m.train_loglik().size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(m.train_loglik()[i], m.score(s[i]));

  // Too few samples for cross-validation.
  const SampleSet two{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.5)};
  EXPECT_EQ(train_shrunk(two).alpha(), 0.0);
}
