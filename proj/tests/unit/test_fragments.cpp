#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bfpca/errors.hpp"
#include "bfpca/expfam.hpp"
#include "bfpca/fragments.hpp"
#include "bfpca/quadrature.hpp"
#include "bfpca/splines.hpp"
#include "test_util.hpp"

namespace bfpca {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using expfam::GaussianMoments;
using testing::max_abs;

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

MatrixXd draw_normals(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

// Small random likelihood problem with n curves of given lengths.
struct Problem {
  std::vector<MatrixXd> designs;
  std::vector<VectorXd> responses;
  LikelihoodCache cache;
  LikelihoodInputs inputs;
};

Problem make_problem(std::mt19937_64& rng, int num_eigen, int num_splines, const std::vector<int>& lengths,
                     bool point_mass) {
  Problem pr;
  const SplineBasis basis = SplineBasis::build(num_splines);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int len : lengths) {
    VectorXd t(len);
    for (auto& v : t) v = unit(rng);
    pr.designs.push_back(design_matrix(t, basis));
    pr.responses.push_back(3.0 * testing::random_vector(rng, len));
  }
  pr.cache = make_likelihood_cache(pr.designs, pr.responses, num_eigen);
  const Index d = pr.cache.nu_dim();
  pr.inputs.nu.mean = testing::random_vector(rng, d);
  pr.inputs.nu.cov = point_mass ? MatrixXd::Zero(d, d) : MatrixXd(0.05 * testing::random_spd(rng, d) / d);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    GaussianMoments z;
    z.mean = testing::random_vector(rng, num_eigen);
    z.cov = point_mass ? MatrixXd::Zero(num_eigen, num_eigen)
                       : MatrixXd(0.3 * testing::random_spd(rng, num_eigen) / num_eigen);
    pr.inputs.zeta.push_back(z);
  }
  pr.inputs.recip_sigsq_eps = 0.7;
  return pr;
}

MatrixXd v_matrix(const VectorXd& nu, Index block, int num_eigen) {
  return Eigen::Map<const MatrixXd>(nu.data(), block, num_eigen + 1);
}

// ---------------------------------------------------------------------------
// Gaussian prior

TEST(GaussianPrior, StandardScorePriorInVechBasis) {
  const int l = 3;
  const Message m = gaussian_prior_message(VectorXd::Zero(l), MatrixXd::Identity(l, l), GaussianBasis::kVech);
  EXPECT_EQ(m.params.family(), Family::kGaussianVech);
  const expfam::GaussianVechParams p = m.params.as_gaussian_vech();
  EXPECT_EQ(p.eta1, VectorXd::Zero(l));
  EXPECT_EQ(p.eta2, -0.5 * expfam::duplication_matrix(l).transpose() * expfam::vec(MatrixXd::Identity(l, l)));
}

TEST(GaussianPrior, ScalarStandardNormal) {
  const Message m = gaussian_prior_message(VectorXd::Zero(1), MatrixXd::Ones(1, 1), GaussianBasis::kVec);
  EXPECT_EQ(m.params.eta(), (VectorXd(2) << 0.0, -0.5).finished());
  EXPECT_FALSE(m.graph.has_value());
}

TEST(GaussianPrior, ExponentMatchesNormalLogDensity) {
  std::mt19937_64 rng(41);
  const int d = 3;
  const VectorXd mu = testing::random_vector(rng, d);
  const MatrixXd cov = testing::random_spd(rng, d);
  const MatrixXd prec = cov.inverse();
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(cov.determinant());
  for (GaussianBasis basis : {GaussianBasis::kVec, GaussianBasis::kVech}) {
    const Message m = gaussian_prior_message(mu, cov, basis);
    const VectorXd eta = m.params.eta();
    double offset = 0.0;
    for (int k = 0; k < 100; ++k) {
      const VectorXd x = 2.0 * testing::random_vector(rng, d);
      const MatrixXd xx = x * x.transpose();
      const VectorXd stat2 = basis == GaussianBasis::kVec ? expfam::vec(xx) : expfam::vech(xx);
      const double exponent = eta.head(d).dot(x) + eta.tail(stat2.size()).dot(stat2);
      const double log_pdf = log_norm - 0.5 * (x - mu).dot(prec * (x - mu));
      // log N(x) - eta^T T(x) is the log-partition term: constant in x.
      if (k == 0) {
        offset = log_pdf - exponent;
      } else {
        EXPECT_NEAR(log_pdf - exponent, offset, 1e-10);
      }
    }
    EXPECT_NEAR(offset, log_norm - 0.5 * mu.dot(prec * mu), 1e-10);
  }
}

TEST(GaussianPrior, RejectsSingularCovariance) {
  EXPECT_THROW(gaussian_prior_message(VectorXd::Zero(2), MatrixXd::Ones(2, 2), GaussianBasis::kVec), DegenerateError);
  EXPECT_THROW(gaussian_prior_message(VectorXd::Zero(2), MatrixXd::Identity(3, 3), GaussianBasis::kVec),
               ValidationError);
}

// ---------------------------------------------------------------------------
// Inverse G-Wishart prior and iterated fragments

TEST(IgwPrior, ClosedForms) {
  Message m = igw_prior_message(1.0);
  EXPECT_EQ(m.params.as_invchisq().eta1, -1.5);
  EXPECT_EQ(m.params.as_invchisq().eta2, -0.5);
  EXPECT_EQ(m.graph, GraphTag::kFull);
  m = igw_prior_message(1e5);
  EXPECT_EQ(m.params.as_invchisq().eta1, -1.5);
  EXPECT_DOUBLE_EQ(m.params.as_invchisq().eta2, -5e-11);
  EXPECT_THROW(igw_prior_message(0.0), ValidationError);
  EXPECT_THROW(igw_prior_message(-2.0), ValidationError);
}

TEST(IgwPrior, NormalisesToInverseChiSquaredDensity) {
  for (double a_hyper : {1.0, 3.0}) {
    const expfam::InvChiSqParams p = igw_prior_message(a_hyper).params.as_invchisq();
    // Integrate exp(eta1 log a + eta2 / a) over a = e^s.
    const VectorXd s = unit_grid(200001).array() * 120.0 - 40.0;
    const VectorXd f = s.unaryExpr([&](double v) { return std::exp(p.eta1 * v + p.eta2 * std::exp(-v) + v); });
    const double z = trapezoid(f, s);
    const double xi = 1.0;
    const double lambda = 1.0 / (a_hyper * a_hyper);
    const double z_exact = std::tgamma(xi / 2.0) * std::pow(2.0 / lambda, xi / 2.0);
    EXPECT_NEAR(z, z_exact, 1e-6 * z_exact);
    for (double a : {0.01, 0.5, 2.0, 40.0}) {
      const double density = std::pow(lambda / 2.0, xi / 2.0) / std::tgamma(xi / 2.0) * std::pow(a, -xi / 2.0 - 1.0) *
                             std::exp(-lambda / (2.0 * a));
      EXPECT_NEAR(std::exp(p.eta1 * std::log(a) + p.eta2 / a) / z, density, 1e-6 * density);
    }
  }
}

TEST(IteratedIgw, Arithmetic) {
  // npbf of a with E(1/a) = 1, npbf of sigma^2 with E(1/sigma^2) = 2.
  const NaturalParams a = NaturalParams::from(expfam::InvChiSqParams{-1.5, -0.5});
  const NaturalParams sigma = NaturalParams::from(expfam::InvChiSqParams{-3.0, -1.0});
  const IteratedIgwMessages m = iterated_igw_messages(sigma, a);
  EXPECT_EQ(m.to_sigma.params.as_invchisq().eta1, -1.5);
  EXPECT_EQ(m.to_sigma.params.as_invchisq().eta2, -0.5);
  EXPECT_EQ(m.to_a.params.as_invchisq().eta1, -0.5);
  EXPECT_EQ(m.to_a.params.as_invchisq().eta2, -1.0);
  EXPECT_EQ(m.to_sigma.graph, GraphTag::kFull);
  EXPECT_EQ(m.to_a.graph, GraphTag::kFull);
}

TEST(IteratedIgw, DegenerateInputsRejected) {
  const NaturalParams ok = NaturalParams::from(expfam::InvChiSqParams{-1.5, -0.5});
  EXPECT_THROW(iterated_igw_messages(ok, NaturalParams::from(expfam::InvChiSqParams{-1.5, 0.0})), DegenerateError);
  EXPECT_THROW(iterated_igw_messages(NaturalParams::from(expfam::InvChiSqParams{-0.5, -1.0}), ok), DegenerateError);
}

// sigma^2 | a ~ Inverse-chi^2(1, 1/a), a ~ Inverse-chi^2(1, 1/A^2) and a fixed
// likelihood contribution sigma^{-T} exp(-S / (2 sigma^2)). The oracle runs
// mean-field coordinate ascent on shape/scale pairs read off the log joint.
TEST(IteratedIgw, FixedPointMatchesCoordinateAscentOracle) {
  const double t_count = 17.0;
  const double s_sum = 23.5;
  const double a_hyper = 2.0;

  double recip_a = 1.0;
  double recip_sigma = 1.0;
  for (int it = 0; it < 2000; ++it) {
    // q(sigma^2) = Inverse-chi^2(T + 1, S + E(1/a)).
    recip_sigma = (t_count + 1.0) / (s_sum + recip_a);
    // q(a) = Inverse-chi^2(2, E(1/sigma^2) + 1/A^2).
    recip_a = 2.0 / (recip_sigma + 1.0 / (a_hyper * a_hyper));
  }

  const NaturalParams lik = NaturalParams::from(expfam::InvChiSqParams{-0.5 * t_count, -0.5 * s_sum});
  const NaturalParams prior = igw_prior_message(a_hyper).params;
  NaturalParams to_sigma = NaturalParams::from(expfam::InvChiSqParams{-1.5, -0.5});
  NaturalParams to_a = NaturalParams::from(expfam::InvChiSqParams{-1.5, -0.5});
  for (int it = 0; it < 2000; ++it) {
    to_sigma = iterated_igw_messages(lik + to_sigma, prior + to_a).to_sigma.params;
    to_a = iterated_igw_messages(lik + to_sigma, prior + to_a).to_a.params;
  }
  EXPECT_NEAR(expfam::invchisq_mean_reciprocal((lik + to_sigma).as_invchisq()), recip_sigma, 1e-8 * recip_sigma);
  EXPECT_NEAR(expfam::invchisq_mean_reciprocal((prior + to_a).as_invchisq()), recip_a, 1e-8 * recip_a);
}

// ---------------------------------------------------------------------------
// Likelihood fragment

TEST(LikelihoodExpectations, ZeroScoreCovarianceGivesOuterProduct) {
  std::mt19937_64 rng(42);
  Problem pr = make_problem(rng, 2, 3, {4, 5}, false);
  pr.inputs.zeta[0].cov.setZero();
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const CurveExpectations& c = ex.curves[0];
  EXPECT_EQ(c.zeta_tilde(0), 1.0);
  EXPECT_EQ(c.zeta_tilde.tail(2), pr.inputs.zeta[0].mean);
  EXPECT_EQ(c.zeta_tilde_outer, c.zeta_tilde * c.zeta_tilde.transpose());
  EXPECT_EQ(c.cov_zeta_tilde.row(0), Eigen::RowVectorXd::Zero(3));
}

TEST(LikelihoodExpectations, PointMassNuGivesQuadraticForm) {
  std::mt19937_64 rng(43);
  Problem pr = make_problem(rng, 2, 3, {4}, true);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const MatrixXd v = v_matrix(pr.inputs.nu.mean, 5, 2);
  const MatrixXd vpsi = v.rightCols(2);
  const MatrixXd ctc = pr.designs[0].transpose() * pr.designs[0];
  EXPECT_LE(max_abs(ex.curves[0].h_psi() - vpsi.transpose() * ctc * vpsi), 1e-10);
  EXPECT_LE(max_abs(ex.curves[0].h_mu_psi() - vpsi.transpose() * ctc * v.col(0)), 1e-10);
  EXPECT_EQ(ex.v, v);
}

TEST(LikelihoodExpectations, TraceFormulasMatchMonteCarlo) {
  std::mt19937_64 rng(44);
  const int l = 2;
  Problem pr = make_problem(rng, l, 3, {4}, false);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const Index p = 5;
  const MatrixXd chol = pr.inputs.nu.cov.llt().matrixL();
  const MatrixXd ctc = pr.designs[0].transpose() * pr.designs[0];
  const int draws = 100000;
  MatrixXd h_mc = MatrixXd::Zero(l + 1, l + 1);
  const MatrixXd z = draw_normals(rng, pr.inputs.nu.mean.size(), draws);
  for (int k = 0; k < draws; ++k) {
    const VectorXd nu = pr.inputs.nu.mean + chol * z.col(k);
    const MatrixXd v = v_matrix(nu, p, l);
    h_mc += v.transpose() * ctc * v;
  }
  h_mc /= draws;
  EXPECT_LE(max_abs(h_mc - ex.curves[0].h), 0.01 * max_abs(ex.curves[0].h));
}

TEST(LikelihoodExpectations, ExpectedSquaredResidualMatchesMonteCarlo) {
  std::mt19937_64 rng(45);
  const int l = 2;
  Problem pr = make_problem(rng, l, 3, {4}, false);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const double exact = lik_expected_sq_residual(pr.cache, ex, 0);
  const MatrixXd chol_nu = pr.inputs.nu.cov.llt().matrixL();
  const MatrixXd chol_z = pr.inputs.zeta[0].cov.llt().matrixL();
  const int draws = 100000;
  const MatrixXd a = draw_normals(rng, pr.inputs.nu.mean.size(), draws);
  const MatrixXd b = draw_normals(rng, l, draws);
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) {
    const VectorXd nu = pr.inputs.nu.mean + chol_nu * a.col(k);
    VectorXd zt(l + 1);
    zt << 1.0, pr.inputs.zeta[0].mean + chol_z * b.col(k);
    sum += (pr.responses[0] - pr.designs[0] * v_matrix(nu, 5, l) * zt).squaredNorm();
  }
  EXPECT_NEAR(sum / draws, exact, 0.01 * exact);
}

TEST(LikelihoodExpectations, HIsSymmetricPositiveSemiDefinite) {
  std::mt19937_64 rng(46);
  for (int rep = 0; rep < 10; ++rep) {
    Problem pr = make_problem(rng, 3, 5, {6, 9, 2}, rep % 2 == 0);
    const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
    for (const CurveExpectations& c : ex.curves) {
      EXPECT_LE(max_abs(c.h - c.h.transpose()), 1e-13 * max_abs(c.h));
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(c.h);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
}

TEST(LikelihoodExpectations, RejectsMismatchedShapes) {
  std::mt19937_64 rng(47);
  Problem pr = make_problem(rng, 2, 3, {4, 5}, false);
  pr.inputs.zeta.pop_back();
  EXPECT_THROW(lik_update_expectations(pr.cache, pr.inputs), ValidationError);
  Problem pr2 = make_problem(rng, 2, 3, {4}, false);
  pr2.inputs.nu.mean = VectorXd::Zero(3);
  EXPECT_THROW(lik_update_expectations(pr2.cache, pr2.inputs), ValidationError);
}

TEST(LikelihoodToNu, ZeroResponsesGiveZeroFirstBlock) {
  std::mt19937_64 rng(48);
  Problem pr = make_problem(rng, 2, 3, {4, 5}, false);
  for (VectorXd& y : pr.responses) y.setZero();
  pr.cache = make_likelihood_cache(pr.designs, pr.responses, 2);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const expfam::GaussianVecParams p = lik_message_to_nu(pr.cache, ex).params.as_gaussian_vec();
  EXPECT_EQ(p.eta1, VectorXd::Zero(pr.cache.nu_dim()));
}

TEST(LikelihoodToNu, KroneckerIdentity) {
  std::mt19937_64 rng(49);
  const int l = 3;
  const SplineBasis basis = SplineBasis::build(4);
  const MatrixXd c = design_matrix((VectorXd(5) << 0.1, 0.2, 0.5, 0.7, 0.95).finished(), basis);
  const VectorXd nu = testing::random_vector(rng, 6 * (l + 1));
  const VectorXd zeta = testing::random_vector(rng, l);
  VectorXd zt(l + 1);
  zt << 1.0, zeta;
  const VectorXd lhs = kron(zt.transpose(), c) * nu;
  VectorXd rhs = c * nu.head(6);
  for (int k = 0; k < l; ++k) rhs += zeta(k) * c * nu.segment(6 * (k + 1), 6);
  EXPECT_LE(max_abs(lhs - rhs), 1e-12);
}

// n = 1, T = 3, L = 1, K = 3 with point masses: the message is the complete
// conditional of nu, expanded directly from A = (zeta_tilde^T kron C).
TEST(LikelihoodToNu, PointMassHandExpansion) {
  std::mt19937_64 rng(50);
  Problem pr = make_problem(rng, 1, 3, {3}, true);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const expfam::GaussianVecParams p = lik_message_to_nu(pr.cache, ex).params.as_gaussian_vec();
  VectorXd zt(2);
  zt << 1.0, pr.inputs.zeta[0].mean(0);
  const MatrixXd a = kron(zt.transpose(), pr.designs[0]);
  const double s = pr.inputs.recip_sigsq_eps;
  EXPECT_LE(max_abs(p.eta1 - s * a.transpose() * pr.responses[0]), 1e-12);
  EXPECT_LE(max_abs(p.eta2 - expfam::vec(-0.5 * s * a.transpose() * a)), 1e-12);
  EXPECT_EQ(p.eta1.size(), 10);
  EXPECT_EQ(p.eta2.size(), 100);
}

TEST(LikelihoodToNu, MatchesKroneckerFormWithCovariances) {
  std::mt19937_64 rng(51);
  Problem pr = make_problem(rng, 2, 3, {4, 6}, false);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const expfam::GaussianVecParams p = lik_message_to_nu(pr.cache, ex).params.as_gaussian_vec();
  const double s = pr.inputs.recip_sigsq_eps;
  VectorXd eta1 = VectorXd::Zero(pr.cache.nu_dim());
  MatrixXd prec = MatrixXd::Zero(pr.cache.nu_dim(), pr.cache.nu_dim());
  for (std::size_t i = 0; i < pr.designs.size(); ++i) {
    VectorXd zt(3);
    zt << 1.0, pr.inputs.zeta[i].mean;
    MatrixXd outer = zt * zt.transpose();
    outer.bottomRightCorner(2, 2) += pr.inputs.zeta[i].cov;
    eta1 += s * kron(zt.transpose(), pr.designs[i]).transpose() * pr.responses[i];
    prec += s * kron(outer, pr.designs[i].transpose() * pr.designs[i]);
  }
  EXPECT_LE(max_abs(p.eta1 - eta1), 1e-11);
  EXPECT_LE(max_abs(p.eta2 - expfam::vec(-0.5 * prec)), 1e-11);
}

TEST(LikelihoodToZeta, ZeroNoisePrecisionGivesZeroMessage) {
  std::mt19937_64 rng(52);
  Problem pr = make_problem(rng, 2, 3, {4}, false);
  pr.inputs.recip_sigsq_eps = 0.0;
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const Message m = lik_message_to_zeta(pr.cache, ex, 0);
  EXPECT_EQ(m.params.eta(), VectorXd::Zero(m.params.eta().size()));
}

TEST(LikelihoodToZeta, PointMassIsConjugateLinearModel) {
  std::mt19937_64 rng(53);
  const int l = 2;
  Problem pr = make_problem(rng, l, 3, {7}, true);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const expfam::GaussianVechParams p = lik_message_to_zeta(pr.cache, ex, 0).params.as_gaussian_vech();
  const MatrixXd v = v_matrix(pr.inputs.nu.mean, 5, l);
  const MatrixXd x = pr.designs[0] * v.rightCols(l);  // regression of y - C nu_mu on zeta
  const VectorXd r = pr.responses[0] - pr.designs[0] * v.col(0);
  const double s = pr.inputs.recip_sigsq_eps;
  const MatrixXd prec = s * x.transpose() * x;
  EXPECT_LE(max_abs(p.eta1 - s * x.transpose() * r), 1e-10);
  EXPECT_LE(max_abs(p.eta2 - expfam::vech(-0.5 * prec).cwiseProduct(expfam::vech(2.0 * MatrixXd::Ones(l, l) -
                                                                                   MatrixXd::Identity(l, l)))),
            1e-10);
}

TEST(LikelihoodToZeta, SingleComponentPosteriorPrecision) {
  std::mt19937_64 rng(54);
  Problem pr = make_problem(rng, 1, 3, {6}, false);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const Message lik = lik_message_to_zeta(pr.cache, ex, 0);
  const Message prior = gaussian_prior_message(VectorXd::Zero(1), MatrixXd::Ones(1, 1), GaussianBasis::kVech);
  const GaussianMoments q = expfam::gaussian_vech_to_moments((lik.params + prior.params).as_gaussian_vech());
  // E(psi^T C^T C psi) = m^T C^T C m + tr(C^T C S) for the psi block.
  const MatrixXd ctc = pr.designs[0].transpose() * pr.designs[0];
  const VectorXd m = pr.inputs.nu.mean.segment(5, 5);
  const MatrixXd cov = pr.inputs.nu.cov.block(5, 5, 5, 5);
  const double expected = pr.inputs.recip_sigsq_eps * (m.dot(ctc * m) + (ctc * cov).trace()) + 1.0;
  EXPECT_NEAR(1.0 / q.cov(0, 0), expected, 1e-10 * expected);
}

TEST(LikelihoodToSigma, FirstComponentCountsObservations) {
  std::mt19937_64 rng(55);
  Problem pr = make_problem(rng, 2, 3, {3, 4}, false);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const Message m = lik_message_to_sigsqeps(pr.cache, ex);
  EXPECT_EQ(m.params.as_invchisq().eta1, -3.5);
  EXPECT_EQ(m.graph, GraphTag::kFull);

  // The first component never depends on the moments.
  pr.inputs.recip_sigsq_eps = 4.0;
  pr.inputs.nu.mean *= 3.0;
  const Message m2 = lik_message_to_sigsqeps(pr.cache, lik_update_expectations(pr.cache, pr.inputs));
  EXPECT_EQ(m2.params.as_invchisq().eta1, -3.5);
}

TEST(LikelihoodToSigma, PointMassResidual) {
  std::mt19937_64 rng(56);
  const int l = 2;
  Problem pr = make_problem(rng, l, 3, {3, 4}, true);
  const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
  const Message m = lik_message_to_sigsqeps(pr.cache, ex);
  const MatrixXd v = v_matrix(pr.inputs.nu.mean, 5, l);
  double rss = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    VectorXd zt(l + 1);
    zt << 1.0, pr.inputs.zeta[i].mean;
    rss += (pr.responses[i] - pr.designs[i] * v * zt).squaredNorm();
  }
  EXPECT_NEAR(m.params.as_invchisq().eta2, -0.5 * rss, 1e-10 * rss);
}

// ---------------------------------------------------------------------------
// Penalization fragment

PenalizationInputs pen_inputs(std::mt19937_64& rng, int l, int k) {
  PenalizationInputs in;
  const Index d = (k + 2) * (l + 1);
  in.nu.mean = testing::random_vector(rng, d);
  in.nu.cov = testing::random_spd(rng, d) / static_cast<double>(d);
  in.recip_sigsq_mu = 1.3;
  in.recip_sigsq_psi = (VectorXd(l).setLinSpaced(0.5, 2.0));
  in.mu_beta = (VectorXd(2) << 0.25, -1.0).finished();
  in.sigma_beta = (MatrixXd(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  return in;
}

TEST(Penalization, VarianceMessageArithmetic) {
  std::mt19937_64 rng(57);
  PenalizationInputs in = pen_inputs(rng, 1, 10);
  // Make E(u_mu^T u_mu) = 2: u_mu mean zero except one entry, covariance zero.
  in.nu.mean.setZero();
  in.nu.mean(2) = std::sqrt(2.0);
  in.nu.cov.setZero();
  const PenalizationMessages m = pen_messages(in, 10);
  EXPECT_EQ(m.to_sigsq_mu.params.as_invchisq().eta1, -5.0);
  EXPECT_NEAR(m.to_sigsq_mu.params.as_invchisq().eta2, -1.0, 1e-15);
  EXPECT_EQ(m.to_sigsq_mu.graph, GraphTag::kFull);
  ASSERT_EQ(m.to_sigsq_psi.size(), 1u);
  EXPECT_EQ(m.to_sigsq_psi[0].graph, GraphTag::kFull);
}

TEST(Penalization, UnitPrecisionCase) {
  std::mt19937_64 rng(58);
  const int l = 2;
  const int k = 4;
  PenalizationInputs in = pen_inputs(rng, l, k);
  in.recip_sigsq_mu = 1.0;
  in.recip_sigsq_psi.setOnes();
  in.sigma_beta = MatrixXd::Identity(2, 2);
  const Index d = (k + 2) * (l + 1);
  EXPECT_LE(max_abs(expected_prior_precision(in, k) - MatrixXd::Identity(d, d)), 1e-15);
  const expfam::GaussianVecParams p = pen_messages(in, k).to_nu.params.as_gaussian_vec();
  VectorXd mu_nu = VectorXd::Zero(d);
  for (int b = 0; b <= l; ++b) mu_nu.segment(b * (k + 2), 2) = in.mu_beta;
  EXPECT_LE(max_abs(p.eta1 - mu_nu), 1e-15);
  EXPECT_LE(max_abs(p.eta2 - expfam::vec(-0.5 * MatrixXd::Identity(d, d))), 1e-15);
}

TEST(Penalization, BlockDiagonalPrecision) {
  std::mt19937_64 rng(59);
  const int l = 2;
  const int k = 3;
  const PenalizationInputs in = pen_inputs(rng, l, k);
  const MatrixXd prec = expected_prior_precision(in, k);
  const MatrixXd beta_prec = in.sigma_beta.inverse();
  const Index p = k + 2;
  for (int b = 0; b <= l; ++b) {
    const double recip = b == 0 ? in.recip_sigsq_mu : in.recip_sigsq_psi(b - 1);
    EXPECT_LE(max_abs(prec.block(b * p, b * p, 2, 2) - beta_prec), 1e-14);
    EXPECT_LE(max_abs(prec.block(b * p + 2, b * p + 2, k, k) - recip * MatrixXd::Identity(k, k)), 1e-15);
  }
  MatrixXd off = prec;
  for (int b = 0; b <= l; ++b) off.block(b * p, b * p, p, p).setZero();
  EXPECT_EQ(max_abs(off), 0.0);
  EXPECT_EQ(prec.block(2, 0, k, 2), MatrixXd::Zero(k, 2));
}

TEST(Penalization, ExpectedSquaredNormMatchesSampling) {
  std::mt19937_64 rng(60);
  const int l = 2;
  const int k = 4;
  const PenalizationInputs in = pen_inputs(rng, l, k);
  const Index p = k + 2;
  const MatrixXd chol = in.nu.cov.llt().matrixL();
  const int draws = 100000;
  const MatrixXd z = draw_normals(rng, in.nu.mean.size(), draws);
  VectorXd mc = VectorXd::Zero(l + 1);
  for (int s = 0; s < draws; ++s) {
    const VectorXd nu = in.nu.mean + chol * z.col(s);
    for (int b = 0; b <= l; ++b) mc(b) += nu.segment(b * p + 2, k).squaredNorm();
  }
  mc /= draws;
  const PenalizationMessages m = pen_messages(in, k);
  for (int b = 0; b <= l; ++b) {
    const double exact = expected_u_sq_norm(in.nu, p, b);
    EXPECT_NEAR(mc(b), exact, 0.01 * exact) << "block " << b;
    const Message& msg = b == 0 ? m.to_sigsq_mu : m.to_sigsq_psi[static_cast<std::size_t>(b - 1)];
    EXPECT_DOUBLE_EQ(msg.params.as_invchisq().eta2, -0.5 * exact);
  }
}

TEST(Penalization, RejectsBadShapes) {
  std::mt19937_64 rng(61);
  PenalizationInputs in = pen_inputs(rng, 2, 3);
  EXPECT_THROW(pen_messages(in, 4), ValidationError);
  in.sigma_beta = MatrixXd::Ones(2, 2);
  EXPECT_THROW(pen_messages(in, 3), DegenerateError);
}

TEST(Fragments, ShapeAudit) {
  std::mt19937_64 rng(62);
  for (int l : {1, 2, 3}) {
    for (int k : {3, 5, 10}) {
      Problem pr = make_problem(rng, l, k, {4, 7}, false);
      const Index d = static_cast<Index>(l + 1) * (k + 2);
      ASSERT_EQ(pr.cache.nu_dim(), d);
      const LikelihoodExpectations ex = lik_update_expectations(pr.cache, pr.inputs);
      EXPECT_EQ(ex.v.rows(), k + 2);
      EXPECT_EQ(ex.v.cols(), l + 1);
      EXPECT_EQ(ex.v_psi().cols(), l);
      EXPECT_EQ(ex.curves[1].zeta_tilde.size(), l + 1);
      EXPECT_EQ(ex.curves[1].h_mu_psi().size(), l);
      EXPECT_EQ(ex.curves[1].h_psi().rows(), l);
      EXPECT_EQ(lik_message_to_nu(pr.cache, ex).params.eta().size(), d + d * d);
      EXPECT_EQ(lik_message_to_zeta(pr.cache, ex, 1).params.eta().size(), l + l * (l + 1) / 2);
      EXPECT_EQ(lik_message_to_sigsqeps(pr.cache, ex).params.eta().size(), 2);

      PenalizationInputs in = pen_inputs(rng, l, k);
      const PenalizationMessages m = pen_messages(in, k);
      EXPECT_EQ(m.to_nu.params.eta().size(), d + d * d);
      EXPECT_EQ(m.to_sigsq_psi.size(), static_cast<std::size_t>(l));
    }
  }
}

}  // namespace
}  // namespace bfpca
