#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "bfpca/errors.hpp"
#include "bfpca/quadrature.hpp"
#include "bfpca/simulate.hpp"
#include "test_util.hpp"

namespace bfpca {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Simulate, ObservationCountsAndTimes) {
  const SimResult sim = generate(SimConfig{});
  ASSERT_EQ(sim.data.size(), 36u);
  EXPECT_NO_THROW(sim.data.validate());
  for (const Curve& c : sim.data.curves) {
    EXPECT_GE(c.t.size(), 20);
    EXPECT_LE(c.t.size(), 30);
    EXPECT_EQ(c.t.size(), c.y.size());
    EXPECT_GE(c.t.minCoeff(), 0.0);
    EXPECT_LT(c.t.maxCoeff(), 1.0);
    for (Index j = 1; j < c.t.size(); ++j) EXPECT_LE(c.t(j - 1), c.t(j));
  }
  EXPECT_EQ(sim.scores.rows(), 36);
  EXPECT_EQ(sim.scores.cols(), 2);
}

TEST(Simulate, ResidualVarianceMatchesNoise) {
  SimConfig config;
  config.n = 5000;
  config.noise_var = 2.0;
  const SimResult sim = generate(config);
  double sum = 0.0;
  double sum_sq = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const Curve& c = sim.data.curves[i];
    for (Index j = 0; j < c.t.size(); ++j) {
      const double t = c.t(j);
      const double signal = true_mean(t) + sim.scores(static_cast<Index>(i), 0) * true_eigenfunction(0, t) +
                            sim.scores(static_cast<Index>(i), 1) * true_eigenfunction(1, t);
      const double r = c.y(j) - signal;
      sum += r;
      sum_sq += r * r;
      count += 1.0;
    }
  }
  ASSERT_GT(count, 1e5);
  const double mean = sum / count;
  EXPECT_NEAR(sum_sq / count - mean * mean, 2.0, 0.02 * 2.0);
}

TEST(Simulate, ScoreCovariance) {
  SimConfig config;
  config.n = 10000;
  config.t_min = 2;
  config.t_max = 2;
  const SimResult sim = generate(config);
  const MatrixXd c = sim.scores.rowwise() - sim.scores.colwise().mean();
  const MatrixXd cov = c.transpose() * c / static_cast<double>(config.n - 1);
  EXPECT_NEAR(cov(0, 0), 1.0, 0.05);
  EXPECT_NEAR(cov(1, 1), 0.25, 0.05 * 0.25);
  EXPECT_NEAR(cov(0, 1), 0.0, 0.05 * 0.5);
}

TEST(Simulate, TruthIsOrthonormal) {
  const VectorXd grid = unit_grid(1001);
  const MatrixXd psi = true_eigenfunctions(grid);
  for (Index a = 0; a < 2; ++a) {
    for (Index b = 0; b < 2; ++b) {
      EXPECT_NEAR(trapezoid_inner(psi.col(a), psi.col(b), grid), a == b ? 1.0 : 0.0, 1e-4);
    }
  }
  EXPECT_DOUBLE_EQ(true_mean(0.5), 3.0);
  EXPECT_NEAR(true_eigenfunction(0, 0.25), std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(true_eigenfunction(1, 0.0), std::numbers::sqrt2, 1e-15);
  EXPECT_THROW(true_eigenfunction(2, 0.1), ValidationError);
}

TEST(Simulate, SameSeedSameData) {
  SimConfig config;
  config.seed = 99;
  const SimResult a = generate(config);
  const SimResult b = generate(config);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.scores, b.scores);
  config.seed = 100;
  EXPECT_FALSE(generate(config).data == a.data);
}

TEST(Simulate, RejectsBadConfig) {
  for (auto mutate : std::vector<void (*)(SimConfig&)>{
           [](SimConfig& c) { c.n = 0; },           [](SimConfig& c) { c.t_min = 1; },
           [](SimConfig& c) { c.t_max = 10; },      [](SimConfig& c) { c.t_max = 10001; },
           [](SimConfig& c) { c.noise_var = 0.0; }, [](SimConfig& c) { c.score_var = {0.25, 1.0}; },
           [](SimConfig& c) { c.score_var = {1.0, 0.0}; }}) {
    SimConfig bad;
    mutate(bad);
    EXPECT_THROW(generate(bad), ValidationError);
  }
}

TEST(Ise, WorkedExamples) {
  const VectorXd grid = unit_grid(1001);
  EXPECT_NEAR(ise(VectorXd::Ones(grid.size()), VectorXd::Zero(grid.size()), grid), 1.0, 1e-14);
  // (3 sqrt(t))^2 = 9t integrates to 4.5; the rule is exact for linear integrands.
  const VectorXd f = 3.0 * grid.cwiseSqrt();
  EXPECT_NEAR(ise(f, VectorXd::Zero(grid.size()), grid), 4.5, 1e-12);
  EXPECT_THROW(ise(f, VectorXd::Zero(10), grid), ValidationError);
}

TEST(Ise, SymmetricAndQuadratic) {
  std::mt19937_64 rng(90);
  const VectorXd grid = unit_grid(501);
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd a = testing::random_vector(rng, grid.size());
    const VectorXd b = testing::random_vector(rng, grid.size());
    const double e = ise(a, b, grid);
    EXPECT_EQ(e, ise(b, a, grid));
    EXPECT_GE(e, 0.0);
    EXPECT_NEAR(ise(3.0 * a, 3.0 * b, grid), 9.0 * e, 1e-12 * e);
    EXPECT_EQ(ise(a, a, grid), 0.0);
  }
}

}  // namespace
}  // namespace bfpca
