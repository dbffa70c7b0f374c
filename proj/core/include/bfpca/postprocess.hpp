#pragma once

// Turns a converged message store into orthonormal eigenfunctions,
// uncorrelated scores, a shifted mean and eigenvalue estimates on a grid.

#include <vector>

#include <Eigen/Dense>

#include "bfpca/expfam.hpp"
#include "bfpca/graph.hpp"
#include "bfpca/splines.hpp"

namespace bfpca {

struct RawSolution {
  expfam::GaussianMoments nu;                 // blocks [nu_mu; nu_psi_1; ...], each K + 2 long
  std::vector<expfam::GaussianMoments> zeta;  // one per curve
  double recip_sigsq_eps = 0.0;
  int num_eigen = 0;
  Eigen::Index block_size = 0;

  Eigen::VectorXd nu_mu() const { return nu.mean.head(block_size); }
  Eigen::VectorXd nu_psi(int l) const { return nu.mean.segment((l + 1) * block_size, block_size); }
  // n x L matrix Xi whose rows are E(zeta_i).
  Eigen::MatrixXd score_means() const;
};

// Moments of the q-densities. Throws DegenerateError for improper ones.
RawSolution extract(const MessageStore& store);

struct GridEvaluation {
  Eigen::VectorXd grid;  // n_g equidistant points, 0 and 1 included
  Eigen::VectorXd mu;    // C_g E(nu_mu)
  Eigen::MatrixXd psi;   // column l is C_g E(nu_psi_l)
  Eigen::MatrixXd xi;    // rows E(zeta_i)^T
};

// Throws ValidationError when n_g < 101.
GridEvaluation evaluate_grid(const RawSolution& raw, const SplineBasis& basis, Eigen::Index grid_size);

struct OrthogonalizeOptions {
  // Strict (default): rank below L raises RankError and a non-positive
  // score-covariance eigenvalue raises DegenerateError. Tolerant: trailing
  // components whose score-covariance eigenvalue is at most
  // prune_tol * (largest) are kept as pruned components instead.
  bool allow_pruned = false;
  double prune_tol = 1e-12;
};

struct FpcaFit {
  Eigen::VectorXd grid;
  Eigen::VectorXd mu;                        // mu_hat
  Eigen::MatrixXd psi;                       // n_g x L, trapezoid-orthonormal columns
  Eigen::MatrixXd scores;                    // n x L
  Eigen::VectorXd eigenvalues;               // descending
  std::vector<Eigen::MatrixXd> score_covariances;  // q-covariances of the rotated scores
  double recip_sigsq_eps = 0.0;
  // Components [rank, L) were switched off by the fit; their scores and
  // eigenvalues are numerically zero.
  Eigen::Index rank = 0;
  // Affine score map: scores.row(i) = xi.row(i) * score_map - score_shift^T.
  Eigen::MatrixXd score_map;
  Eigen::VectorXd score_shift;
};

// SVD/eigen rotation of (mu, Psi, Xi). Throws ValidationError for n < 2; see
// OrthogonalizeOptions for the rank and eigenvalue checks.
FpcaFit orthogonalize(const Eigen::VectorXd& grid, const Eigen::VectorXd& mu, const Eigen::MatrixXd& psi,
                      const Eigen::MatrixXd& xi, const OrthogonalizeOptions& options = {});

// extract -> evaluate_grid -> orthogonalize, carrying score covariances and
// the noise precision through. Pruned components are allowed here.
FpcaFit postprocess(const MessageStore& store, const SplineBasis& basis, Eigen::Index grid_size);

// n_g x n matrix; column i is mu_hat + psi * scores.row(i)^T.
Eigen::MatrixXd fitted_curves(const FpcaFit& fit);
// Same quantity before rotation: mu + psi * xi^T.
Eigen::MatrixXd fitted_curves(const GridEvaluation& eval);

// Modified Gram-Schmidt under the trapezoid inner product. Throws RankError
// when a column's residual norm falls below 1e-12.
Eigen::MatrixXd gram_schmidt_oracle(const Eigen::MatrixXd& columns, const Eigen::VectorXd& grid);

// Flips (psi_l, scores_l) jointly when <reference_l, psi_l> < 0 for each
// l < min(L, reference.cols()). Throws ValidationError on a zero inner product.
FpcaFit sign_align(FpcaFit fit, const Eigen::MatrixXd& reference);

}  // namespace bfpca
