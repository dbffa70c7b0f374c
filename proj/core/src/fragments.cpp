#include "bfpca/fragments.hpp"

#include <cmath>
#include <string>

#include "bfpca/errors.hpp"

namespace bfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Message invchisq_message(double eta1, double eta2) {
  return {NaturalParams::from(expfam::InvChiSqParams{eta1, eta2}), GraphTag::kFull};
}

// tr(A B) for symmetric B without forming the product.
double trace_product(const MatrixXd& a, const MatrixXd& b_sym) {
  return a.cwiseProduct(b_sym).sum();
}

}  // namespace

Message gaussian_prior_message(const VectorXd& mean, const MatrixXd& cov, GaussianBasis basis) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError("gaussian prior: covariance is " + std::to_string(cov.rows()) + "x" +
                          std::to_string(cov.cols()) + " for a mean of length " +
                          std::to_string(mean.size()));
  }
  if (basis == GaussianBasis::kVec) {
    return {NaturalParams::from(expfam::gaussian_moments_to_vec(mean, cov)), std::nullopt};
  }
  return {NaturalParams::from(expfam::gaussian_moments_to_vech(mean, cov)), std::nullopt};
}

Message igw_prior_message(double scale_hyper) {
  if (!(scale_hyper > 0.0) || !std::isfinite(scale_hyper)) {
    throw ValidationError("inverse G-Wishart prior needs A > 0, got " + std::to_string(scale_hyper));
  }
  return invchisq_message(-1.5, -0.5 / (scale_hyper * scale_hyper));
}

IteratedIgwMessages iterated_igw_messages(const NaturalParams& npbf_sigma, const NaturalParams& npbf_a) {
  const double recip_a = expfam::invchisq_mean_reciprocal(npbf_a.as_invchisq());
  const double recip_sigma = expfam::invchisq_mean_reciprocal(npbf_sigma.as_invchisq());
  if (!(recip_a > 0.0) || !std::isfinite(recip_a)) {
    throw DegenerateError("E(1/a) = " + std::to_string(recip_a) + " is not positive");
  }
  if (!(recip_sigma > 0.0) || !std::isfinite(recip_sigma)) {
    throw DegenerateError("E(1/sigma^2) = " + std::to_string(recip_sigma) + " is not positive");
  }
  return {invchisq_message(-1.5, -0.5 * recip_a), invchisq_message(-0.5, -0.5 * recip_sigma)};
}

LikelihoodCache make_likelihood_cache(const std::vector<MatrixXd>& designs,
                                      const std::vector<VectorXd>& responses, int num_eigen) {
  if (designs.empty() || designs.size() != responses.size()) {
    throw ValidationError("likelihood cache: " + std::to_string(designs.size()) + " designs for " +
                          std::to_string(responses.size()) + " responses");
  }
  if (num_eigen < 1) throw ValidationError("likelihood cache: L must be >= 1");
  LikelihoodCache cache;
  cache.num_eigen = num_eigen;
  cache.block_size = designs.front().cols();
  cache.curves.reserve(designs.size());
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const MatrixXd& c = designs[i];
    const VectorXd& y = responses[i];
    if (c.cols() != cache.block_size || c.rows() != y.size() || y.size() == 0) {
      throw ValidationError("likelihood cache: curve " + std::to_string(i) +
                            " has inconsistent design/response shapes");
    }
    CurveCache cc;
    cc.ctc = c.transpose() * c;
    cc.cty = c.transpose() * y;
    cc.yty = y.squaredNorm();
    cc.num_obs = y.size();
    cache.total_obs += static_cast<double>(y.size());
    cache.curves.push_back(std::move(cc));
  }
  return cache;
}

LikelihoodExpectations lik_update_expectations(const LikelihoodCache& cache,
                                               const LikelihoodInputs& inputs) {
  const Index p = cache.block_size;
  const int num_eigen = cache.num_eigen;
  const Index blocks = num_eigen + 1;
  if (inputs.nu.mean.size() != cache.nu_dim() || inputs.nu.cov.rows() != cache.nu_dim() ||
      inputs.nu.cov.cols() != cache.nu_dim()) {
    throw ValidationError("likelihood fragment: nu moments have dimension " +
                          std::to_string(inputs.nu.mean.size()) + ", expected " +
                          std::to_string(cache.nu_dim()));
  }
  if (inputs.zeta.size() != cache.curves.size()) {
    throw ValidationError("likelihood fragment: " + std::to_string(inputs.zeta.size()) +
                          " score moments for " + std::to_string(cache.curves.size()) + " curves");
  }
  if (!(inputs.recip_sigsq_eps >= 0.0) || !std::isfinite(inputs.recip_sigsq_eps)) {
    throw DegenerateError("likelihood fragment: E(1/sigsq_eps) = " +
                          std::to_string(inputs.recip_sigsq_eps));
  }

  LikelihoodExpectations ex;
  ex.recip_sigsq_eps = inputs.recip_sigsq_eps;
  ex.v = MatrixXd::Map(inputs.nu.mean.data(), p, blocks);
  ex.curves.resize(cache.curves.size());

  for (std::size_t i = 0; i < cache.curves.size(); ++i) {
    const CurveCache& cc = cache.curves[i];
    const expfam::GaussianMoments& z = inputs.zeta[i];
    if (z.mean.size() != num_eigen || z.cov.rows() != num_eigen || z.cov.cols() != num_eigen) {
      throw ValidationError("likelihood fragment: score moments of curve " + std::to_string(i) +
                            " have the wrong dimension");
    }
    CurveExpectations& ce = ex.curves[i];
    ce.zeta_tilde.resize(blocks);
    ce.zeta_tilde << 1.0, z.mean;
    ce.cov_zeta_tilde = MatrixXd::Zero(blocks, blocks);
    ce.cov_zeta_tilde.bottomRightCorner(num_eigen, num_eigen) = z.cov;
    ce.zeta_tilde_outer = ce.cov_zeta_tilde + ce.zeta_tilde * ce.zeta_tilde.transpose();

    const MatrixXd ctc_v = cc.ctc * ex.v;
    ce.h = ex.v.transpose() * ctc_v;
    for (Index a = 0; a < blocks; ++a) {
      for (Index b = a; b < blocks; ++b) {
        const double tr = trace_product(inputs.nu.cov.block(a * p, b * p, p, p), cc.ctc);
        ce.h(a, b) += tr;
        if (b != a) ce.h(b, a) += tr;
      }
    }
    ce.h = 0.5 * (ce.h + ce.h.transpose());
  }
  return ex;
}

Message lik_message_to_nu(const LikelihoodCache& cache, const LikelihoodExpectations& ex) {
  const Index p = cache.block_size;
  const Index blocks = cache.num_eigen + 1;
  const Index d = cache.nu_dim();
  VectorXd eta1 = VectorXd::Zero(d);
  MatrixXd prec = MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < cache.curves.size(); ++i) {
    const CurveCache& cc = cache.curves[i];
    const CurveExpectations& ce = ex.curves[i];
    for (Index a = 0; a < blocks; ++a) {
      eta1.segment(a * p, p).noalias() += ce.zeta_tilde(a) * cc.cty;
      for (Index b = 0; b < blocks; ++b) {
        prec.block(a * p, b * p, p, p).noalias() += ce.zeta_tilde_outer(a, b) * cc.ctc;
      }
    }
  }
  const double s = ex.recip_sigsq_eps;
  expfam::GaussianVecParams params{s * eta1, -0.5 * s * expfam::vec(prec)};
  return {NaturalParams::from(params), std::nullopt};
}

Message lik_message_to_zeta(const LikelihoodCache& cache, const LikelihoodExpectations& ex,
                            std::size_t i) {
  if (i >= cache.curves.size()) {
    throw ValidationError("likelihood fragment: curve index " + std::to_string(i) + " out of range");
  }
  const CurveCache& cc = cache.curves[i];
  const CurveExpectations& ce = ex.curves[i];
  const double s = ex.recip_sigsq_eps;
  expfam::GaussianVechParams params{
      s * (ex.v_psi().transpose() * cc.cty - ce.h_mu_psi()),
      -0.5 * s * expfam::duplication_transpose_times_vec(ce.h_psi())};
  return {NaturalParams::from(params), std::nullopt};
}

double lik_expected_sq_residual(const LikelihoodCache& cache, const LikelihoodExpectations& ex,
                                std::size_t i) {
  const CurveCache& cc = cache.curves[i];
  const CurveExpectations& ce = ex.curves[i];
  return cc.yty - 2.0 * ce.zeta_tilde.dot(ex.v.transpose() * cc.cty) +
         trace_product(ce.zeta_tilde_outer, ce.h);
}

Message lik_message_to_sigsqeps(const LikelihoodCache& cache, const LikelihoodExpectations& ex) {
  double total = 0.0;
  for (std::size_t i = 0; i < cache.curves.size(); ++i) total += lik_expected_sq_residual(cache, ex, i);
  return invchisq_message(-0.5 * cache.total_obs, -0.5 * total);
}

MatrixXd expected_prior_precision(const PenalizationInputs& inputs, Index num_splines) {
  const Index p = num_splines + 2;
  const Index num_eigen = inputs.recip_sigsq_psi.size();
  if (inputs.sigma_beta.rows() != 2 || inputs.sigma_beta.cols() != 2) {
    throw ValidationError("penalization fragment: Sigma_beta must be 2x2");
  }
  const MatrixXd beta_prec = expfam::invert_precision(inputs.sigma_beta, "Sigma_beta");
  const Index d = p * (num_eigen + 1);
  MatrixXd out = MatrixXd::Zero(d, d);
  for (Index block = 0; block <= num_eigen; ++block) {
    const double recip = block == 0 ? inputs.recip_sigsq_mu : inputs.recip_sigsq_psi(block - 1);
    out.block(block * p, block * p, 2, 2) = beta_prec;
    out.block(block * p + 2, block * p + 2, num_splines, num_splines).diagonal().setConstant(recip);
  }
  return out;
}

double expected_u_sq_norm(const expfam::GaussianMoments& nu, Index block_size, int block) {
  const Index k = block_size - 2;
  const Index start = block * block_size + 2;
  return nu.mean.segment(start, k).squaredNorm() + nu.cov.block(start, start, k, k).trace();
}

PenalizationMessages pen_messages(const PenalizationInputs& inputs, Index num_splines) {
  const Index p = num_splines + 2;
  const Index num_eigen = inputs.recip_sigsq_psi.size();
  const Index d = p * (num_eigen + 1);
  if (inputs.nu.mean.size() != d || inputs.nu.cov.rows() != d || inputs.nu.cov.cols() != d) {
    throw ValidationError("penalization fragment: nu moments have dimension " +
                          std::to_string(inputs.nu.mean.size()) + ", expected " + std::to_string(d));
  }
  if (inputs.mu_beta.size() != 2) {
    throw ValidationError("penalization fragment: mu_beta must have length 2");
  }

  const MatrixXd prec = expected_prior_precision(inputs, num_splines);
  VectorXd mu_nu = VectorXd::Zero(d);
  for (Index block = 0; block <= num_eigen; ++block) mu_nu.segment(block * p, 2) = inputs.mu_beta;

  PenalizationMessages out;
  out.to_nu = {NaturalParams::from(expfam::GaussianVecParams{prec * mu_nu, -0.5 * expfam::vec(prec)}),
               std::nullopt};
  const double half_k = 0.5 * static_cast<double>(num_splines);
  out.to_sigsq_mu = invchisq_message(-half_k, -0.5 * expected_u_sq_norm(inputs.nu, p, 0));
  out.to_sigsq_psi.reserve(static_cast<std::size_t>(num_eigen));
  for (Index l = 0; l < num_eigen; ++l) {
    out.to_sigsq_psi.push_back(
        invchisq_message(-half_k, -0.5 * expected_u_sq_norm(inputs.nu, p, static_cast<int>(l) + 1)));
  }
  return out;
}

}  // namespace bfpca
