#pragma once

#include <Eigen/Dense>

namespace bfpca {

/// O'Sullivan penalised-spline basis on [0, 1] in mixed-model form.
///
/// Cubic B-splines are built on K - 2 equally spaced interior knots, giving
/// K + 2 raw columns. The integrated squared second-derivative penalty of the
/// raw basis has rank K; its positive-eigenvalue eigenvectors, scaled by
/// eigenvalue^{-1/2}, map raw evaluations to K columns z_1..z_K whose penalty
/// is the identity. The linear part lives in the (1, t) columns of the design
/// matrix.
class SplineBasis {
 public:
  static SplineBasis build(Eigen::Index num_basis);

  Eigen::Index size() const { return transform_.cols(); }
  const Eigen::VectorXd& interior_knots() const { return interior_knots_; }
  // (K + 2) x K map from raw B-spline values to mixed-model columns.
  const Eigen::MatrixXd& transform() const { return transform_; }

  // Raw cubic B-spline values (and second derivatives) at t in [0, 1].
  Eigen::VectorXd raw(double t) const;
  Eigen::VectorXd raw_second_derivative(double t) const;

  // z_1(t)..z_K(t).
  Eigen::VectorXd evaluate(double t) const;
  Eigen::VectorXd evaluate_second_derivative(double t) const;
  // Row i holds z(times(i)).
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& times) const;

  // Penalty matrix of the raw basis: Omega_jk = int_0^1 B_j'' B_k''.
  Eigen::MatrixXd raw_penalty() const;

 private:
  SplineBasis() = default;

  Eigen::VectorXd interior_knots_;
  Eigen::VectorXd knots_;  // full knot vector, boundary knots repeated 4 times
  Eigen::MatrixXd transform_;
};

/// Rows (1, t, z_1(t), ..., z_K(t)). Times must lie in [0, 1].
Eigen::MatrixXd design_matrix(const Eigen::VectorXd& times, const SplineBasis& basis);

}  // namespace bfpca
