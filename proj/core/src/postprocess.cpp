#include "bfpca/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bfpca/errors.hpp"
#include "bfpca/quadrature.hpp"

namespace bfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kRankTol = 1e-12;

}  // namespace

MatrixXd RawSolution::score_means() const {
  MatrixXd xi(static_cast<Index>(zeta.size()), num_eigen);
  for (std::size_t i = 0; i < zeta.size(); ++i) xi.row(static_cast<Index>(i)) = zeta[i].mean.transpose();
  return xi;
}

RawSolution extract(const MessageStore& store) {
  const FactorGraph& graph = store.graph();
  RawSolution raw;
  raw.num_eigen = graph.num_eigen();
  raw.block_size = graph.num_splines() + 2;
  try {
    raw.nu = expfam::gaussian_vec_to_moments(q_natural_params(store, NodeId::nu()).as_gaussian_vec());
  } catch (const DegenerateError& e) {
    throw DegenerateError(std::string("q(nu): ") + e.what());
  }
  raw.zeta.reserve(static_cast<std::size_t>(graph.num_curves()));
  for (int i = 0; i < graph.num_curves(); ++i) {
    try {
      raw.zeta.push_back(
          expfam::gaussian_vech_to_moments(q_natural_params(store, NodeId::zeta(i)).as_gaussian_vech()));
    } catch (const DegenerateError& e) {
      throw DegenerateError("q(" + to_string(NodeId::zeta(i)) + "): " + e.what());
    }
  }
  raw.recip_sigsq_eps =
      expfam::invchisq_mean_reciprocal(q_natural_params(store, NodeId::sigsq_eps()).as_invchisq());
  return raw;
}

GridEvaluation evaluate_grid(const RawSolution& raw, const SplineBasis& basis, Index grid_size) {
  if (grid_size < 101) {
    throw ValidationError("grid size must be >= 101, got " + std::to_string(grid_size));
  }
  if (basis.size() + 2 != raw.block_size) {
    throw ValidationError("basis has " + std::to_string(basis.size()) + " columns, solution expects " +
                          std::to_string(raw.block_size - 2));
  }
  GridEvaluation out;
  out.grid = unit_grid(grid_size);
  const MatrixXd cg = design_matrix(out.grid, basis);
  out.mu = cg * raw.nu_mu();
  out.psi.resize(grid_size, raw.num_eigen);
  for (int l = 0; l < raw.num_eigen; ++l) out.psi.col(l) = cg * raw.nu_psi(l);
  out.xi = raw.score_means();
  return out;
}

FpcaFit orthogonalize(const VectorXd& grid, const VectorXd& mu, const MatrixXd& psi, const MatrixXd& xi,
                      const OrthogonalizeOptions& options) {
  const Index num_eigen = psi.cols();
  const Index n = xi.rows();
  if (grid.size() != mu.size() || psi.rows() != grid.size() || xi.cols() != num_eigen || num_eigen < 1) {
    throw ValidationError("orthogonalize: inconsistent shapes");
  }
  if (n < 2) throw ValidationError("orthogonalize: needs at least two curves");

  // SVD in the trapezoid inner product: columns of u are orthonormal under the
  // same rule that later normalises them.
  const VectorXd sqrt_w = trapezoid_weights(grid).cwiseSqrt();
  if (!(sqrt_w.minCoeff() > 0.0)) throw ValidationError("orthogonalize: grid must be strictly ascending");
  Eigen::JacobiSVD<MatrixXd> svd(sqrt_w.asDiagonal() * psi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& d = svd.singularValues();
  if (!(d(0) > 0.0) || (!options.allow_pruned && d(num_eigen - 1) <= kRankTol * d(0))) {
    throw RankError("orthogonalize: Psi has rank below " + std::to_string(num_eigen) +
                    " (singular values " + std::to_string(d(0)) + " .. " +
                    std::to_string(d(num_eigen - 1)) + ")");
  }
  const MatrixXd u = sqrt_w.cwiseInverse().asDiagonal() * svd.matrixU();
  const MatrixXd vd = svd.matrixV() * d.asDiagonal();

  const MatrixXd z = xi * vd;
  const VectorXd m = z.colwise().mean().transpose();
  const MatrixXd centred = z.rowwise() - m.transpose();
  const MatrixXd c_zeta = (centred.transpose() * centred) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (c_zeta + c_zeta.transpose()));
  if (eig.info() != Eigen::Success) throw DegenerateError("orthogonalize: eigen-decomposition failed");
  const VectorXd lambda = eig.eigenvalues().reverse();
  const MatrixXd q = eig.eigenvectors().rowwise().reverse();

  Index rank = num_eigen;
  for (Index l = 0; l < num_eigen; ++l) {
    const bool pruned = options.allow_pruned ? !(lambda(l) > options.prune_tol * lambda(0)) : !(lambda(l) > 0.0);
    if (!pruned) continue;
    if (!options.allow_pruned || l == 0) {
      throw DegenerateError("orthogonalize: score covariance eigenvalue " + std::to_string(l + 1) +
                            " is non-positive (" + std::to_string(lambda(l)) + ")");
    }
    rank = l;
    break;
  }

  // psi_tilde = U Q Lambda^(1/2) and xi_tilde = (Z - 1 m^T) Q Lambda^(-1/2);
  // after trapezoid normalisation the Lambda factors cancel, so directions
  // and scores come from U Q and (Z - 1 m^T) Q alone.
  const MatrixXd w = u * q;
  const MatrixXd scores_raw = centred * q;
  VectorXd norms(num_eigen);
  VectorXd eigenvalues(num_eigen);
  for (Index l = 0; l < num_eigen; ++l) {
    norms(l) = std::sqrt(trapezoid(w.col(l).cwiseAbs2(), grid));
    eigenvalues(l) = l < rank ? lambda(l) * norms(l) * norms(l)
                              : (scores_raw.col(l) * norms(l)).squaredNorm() / static_cast<double>(n - 1);
  }

  // Trapezoid norms can reorder near-equal components; ties keep index order.
  // Pruned components stay last.
  std::vector<Index> order(static_cast<std::size_t>(num_eigen));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.begin() + rank,
                   [&](Index a, Index b) { return eigenvalues(a) > eigenvalues(b); });

  FpcaFit fit;
  fit.grid = grid;
  fit.mu = mu + u * m;
  fit.rank = rank;
  fit.psi.resize(grid.size(), num_eigen);
  fit.scores.resize(n, num_eigen);
  fit.eigenvalues.resize(num_eigen);
  fit.score_map.resize(num_eigen, num_eigen);
  fit.score_shift.resize(num_eigen);
  const VectorXd m_rot = q.transpose() * m;
  for (Index k = 0; k < num_eigen; ++k) {
    const Index l = order[static_cast<std::size_t>(k)];
    fit.psi.col(k) = w.col(l) / norms(l);
    fit.scores.col(k) = scores_raw.col(l) * norms(l);
    fit.eigenvalues(k) = eigenvalues(l);
    fit.score_map.col(k) = vd * q.col(l) * norms(l);
    fit.score_shift(k) = m_rot(l) * norms(l);
  }
  return fit;
}

FpcaFit postprocess(const MessageStore& store, const SplineBasis& basis, Index grid_size) {
  const RawSolution raw = extract(store);
  const GridEvaluation eval = evaluate_grid(raw, basis, grid_size);
  FpcaFit fit = orthogonalize(eval.grid, eval.mu, eval.psi, eval.xi, {.allow_pruned = true});
  fit.recip_sigsq_eps = raw.recip_sigsq_eps;
  fit.score_covariances.reserve(raw.zeta.size());
  for (const expfam::GaussianMoments& z : raw.zeta) {
    fit.score_covariances.push_back(fit.score_map.transpose() * z.cov * fit.score_map);
  }
  return fit;
}

MatrixXd fitted_curves(const FpcaFit& fit) {
  return (fit.psi * fit.scores.transpose()).colwise() + fit.mu;
}

MatrixXd fitted_curves(const GridEvaluation& eval) {
  return (eval.psi * eval.xi.transpose()).colwise() + eval.mu;
}

MatrixXd gram_schmidt_oracle(const MatrixXd& columns, const VectorXd& grid) {
  MatrixXd out = columns;
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index k = 0; k < j; ++k) {
      out.col(j) -= trapezoid_inner(out.col(j), out.col(k), grid) * out.col(k);
    }
    const double norm = std::sqrt(trapezoid_inner(out.col(j), out.col(j), grid));
    if (!(norm >= 1e-12)) {
      throw RankError("gram_schmidt_oracle: column " + std::to_string(j) + " is linearly dependent");
    }
    out.col(j) /= norm;
  }
  return out;
}

FpcaFit sign_align(FpcaFit fit, const MatrixXd& reference) {
  if (reference.rows() != fit.grid.size()) {
    throw ValidationError("sign_align: reference has " + std::to_string(reference.rows()) +
                          " rows, grid has " + std::to_string(fit.grid.size()));
  }
  const Index count = std::min(fit.psi.cols(), reference.cols());
  for (Index l = 0; l < count; ++l) {
    const double ip = trapezoid_inner(fit.psi.col(l), reference.col(l), fit.grid);
    if (ip == 0.0) {
      throw ValidationError("sign_align: eigenfunction " + std::to_string(l + 1) +
                            " is orthogonal to its reference");
    }
    if (ip < 0.0) {
      fit.psi.col(l) *= -1.0;
      fit.scores.col(l) *= -1.0;
      if (l < fit.score_map.cols()) fit.score_map.col(l) *= -1.0;
      if (l < fit.score_shift.size()) fit.score_shift(l) *= -1.0;
      for (MatrixXd& cov : fit.score_covariances) {
        cov.row(l) *= -1.0;
        cov.col(l) *= -1.0;
      }
    }
  }
  return fit;
}

}  // namespace bfpca
