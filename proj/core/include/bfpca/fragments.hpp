#pragma once

// Fragment updates: Gaussian prior, scalar inverse G-Wishart prior, scalar
// iterated inverse G-Wishart, and the FPCA likelihood and penalization
// fragments. Every function is pure; the orchestrator moves results in and
// out of the message store.

#include <vector>

#include <Eigen/Dense>

#include "bfpca/expfam.hpp"
#include "bfpca/graph.hpp"

namespace bfpca {

enum class GaussianBasis { kVec, kVech };

// Constant message of a N(mean, cov) prior in the requested basis.
Message gaussian_prior_message(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                               GaussianBasis basis);

// Constant message of a ~ Inverse-chi^2(1, 1/A^2), tagged G_full.
Message igw_prior_message(double scale_hyper);

struct IteratedIgwMessages {
  Message to_sigma;
  Message to_a;
};

// Messages of the factor p(sigma^2 | a) = Inverse-chi^2(1, 1/a). Each output
// uses E(1/.) of the opposite node, computed from that edge's npbf.
IteratedIgwMessages iterated_igw_messages(const NaturalParams& npbf_sigma,
                                          const NaturalParams& npbf_a);

// ---------------------------------------------------------------------------
// Likelihood fragment

// Iteration-invariant products of one curve.
struct CurveCache {
  Eigen::MatrixXd ctc;  // C^T C, (K + 2) x (K + 2)
  Eigen::VectorXd cty;  // C^T y
  double yty = 0.0;
  Eigen::Index num_obs = 0;
};

struct LikelihoodCache {
  std::vector<CurveCache> curves;
  int num_eigen = 0;
  Eigen::Index block_size = 0;  // K + 2
  double total_obs = 0.0;

  Eigen::Index nu_dim() const { return block_size * (num_eigen + 1); }
};

LikelihoodCache make_likelihood_cache(const std::vector<Eigen::MatrixXd>& designs,
                                      const std::vector<Eigen::VectorXd>& responses,
                                      int num_eigen);

// Moments read off the npbf of each likelihood edge.
struct LikelihoodInputs {
  expfam::GaussianMoments nu;                 // length (L + 1)(K + 2)
  std::vector<expfam::GaussianMoments> zeta;  // one per curve, length L
  double recip_sigsq_eps = 0.0;               // E(1/sigsq_eps)
};

// Per-curve expectations. zeta_tilde = (1, zeta). `h` is E(H_i), whose
// (a, b) entry is E(nu_a^T C^T C nu_b) over blocks a, b in {mu, psi_1..psi_L};
// its first row past the corner is E(h_{mu psi}) and its lower-right L x L
// block is E(H_psi).
struct CurveExpectations {
  Eigen::VectorXd zeta_tilde;      // L + 1
  Eigen::MatrixXd cov_zeta_tilde;  // blockdiag(0, Cov(zeta))
  Eigen::MatrixXd zeta_tilde_outer;
  Eigen::MatrixXd h;

  Eigen::VectorXd h_mu_psi() const { return h.row(0).tail(h.cols() - 1).transpose(); }
  Eigen::MatrixXd h_psi() const { return h.bottomRightCorner(h.rows() - 1, h.cols() - 1); }
};

struct LikelihoodExpectations {
  Eigen::MatrixXd v;  // E(V) = [E(nu_mu), E(nu_psi_1), ...], (K + 2) x (L + 1)
  std::vector<CurveExpectations> curves;
  double recip_sigsq_eps = 0.0;

  Eigen::MatrixXd v_psi() const { return v.rightCols(v.cols() - 1); }
};

LikelihoodExpectations lik_update_expectations(const LikelihoodCache& cache,
                                               const LikelihoodInputs& inputs);

// Gaussian-vec message to nu.
Message lik_message_to_nu(const LikelihoodCache& cache, const LikelihoodExpectations& ex);
// Gaussian-vech message to zeta_i.
Message lik_message_to_zeta(const LikelihoodCache& cache, const LikelihoodExpectations& ex,
                            std::size_t i);
// E||y_i - C_i V zeta_tilde_i||^2.
double lik_expected_sq_residual(const LikelihoodCache& cache, const LikelihoodExpectations& ex,
                                std::size_t i);
// Inverse-chi^2 message to sigsq_eps, tagged G_full.
Message lik_message_to_sigsqeps(const LikelihoodCache& cache, const LikelihoodExpectations& ex);

// ---------------------------------------------------------------------------
// Penalization fragment

struct PenalizationInputs {
  expfam::GaussianMoments nu;
  double recip_sigsq_mu = 0.0;                // E(1/sigsq_mu)
  Eigen::VectorXd recip_sigsq_psi;            // E(1/sigsq_psi_l), length L
  Eigen::VectorXd mu_beta;                    // prior mean of every beta block, length 2
  Eigen::MatrixXd sigma_beta;                 // prior covariance of every beta block, 2 x 2
};

struct PenalizationMessages {
  Message to_nu;
  Message to_sigsq_mu;
  std::vector<Message> to_sigsq_psi;
};

// E(Sigma_nu^{-1}) = blockdiag over blocks of [Sigma_beta^{-1}, E(1/sigsq) I_K].
Eigen::MatrixXd expected_prior_precision(const PenalizationInputs& inputs, Eigen::Index num_splines);
// E(u^T u) for the spline coefficients of block `block` (0 = mean).
double expected_u_sq_norm(const expfam::GaussianMoments& nu, Eigen::Index block_size, int block);

PenalizationMessages pen_messages(const PenalizationInputs& inputs, Eigen::Index num_splines);

}  // namespace bfpca
