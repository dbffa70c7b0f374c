#pragma once

// Reshaping operators (vec, vech, duplication matrices) and the natural
// parameterisations used for every message: Gaussian in the vec and vech
// bases, and the scalar inverse-chi-squared family.

#include <Eigen/Dense>

namespace bfpca::expfam {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Column-major stacking of a d1 x d2 matrix.
VectorXd vec(const MatrixXd& a);
// Inverse of vec. Throws ValidationError when rows * cols != v.size().
MatrixXd vec_inverse(const VectorXd& v, Index rows, Index cols);
// Square inverse of vec; v.size() must be a perfect square.
MatrixXd vec_inverse(const VectorXd& v);

// Column-wise stacking of the lower triangle, diagonal included.
VectorXd vech(const MatrixXd& a);
// Symmetric matrix whose vech is v.
MatrixXd vech_inverse(const VectorXd& v);

Index vech_length(Index d);
// Recovers d from d(d+1)/2; throws if v_len is not triangular.
Index dim_from_vech_length(Index v_len);

// D_d: d^2 x d(d+1)/2 with D_d vech(A) = vec(A) for symmetric A.
MatrixXd duplication_matrix(Index d);
// D_d^+ = (D_d^T D_d)^{-1} D_d^T.
MatrixXd duplication_pinv(Index d);

// D_d^T vec(A) computed without forming D_d. A need not be symmetric.
VectorXd duplication_transpose_times_vec(const MatrixXd& a);
// vec^{-1}(D_d^{+T} v) computed without forming D_d^+.
MatrixXd duplication_pinv_transpose_reshape(const VectorXd& v);

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

// eta1 = Sigma^{-1} mu, eta2 = -1/2 vec(Sigma^{-1}) (length d^2).
struct GaussianVecParams {
  VectorXd eta1;
  VectorXd eta2;

  Index dim() const { return eta1.size(); }
};

// eta1 = Sigma^{-1} mu, eta2 = -1/2 D_d^T vec(Sigma^{-1}) (length d(d+1)/2).
struct GaussianVechParams {
  VectorXd eta1;
  VectorXd eta2;

  Index dim() const { return eta1.size(); }
};

// eta1 = -(xi + 2)/2, eta2 = -lambda/2 for Inverse-chi^2(xi, lambda).
struct InvChiSqParams {
  double eta1 = 0.0;
  double eta2 = 0.0;

  bool is_proper() const { return eta1 < -1.0 && eta2 < 0.0; }
};

struct ShapeScale {
  double shape = 0.0;  // xi
  double scale = 0.0;  // lambda
};

// Inverts a precision matrix after symmetrising it. Uses a Cholesky factor;
// if that fails, falls back to an eigen-decomposition and throws
// DegenerateError when the smallest eigenvalue is below 1e-10 times the
// largest (or non-positive). `what` names the offending quantity.
MatrixXd invert_precision(const MatrixXd& precision, const char* what = "precision");

GaussianMoments gaussian_vec_to_moments(const GaussianVecParams& p);
GaussianVecParams gaussian_moments_to_vec(const VectorXd& mean, const MatrixXd& cov);

GaussianMoments gaussian_vech_to_moments(const GaussianVechParams& p);
GaussianVechParams gaussian_moments_to_vech(const VectorXd& mean, const MatrixXd& cov);

// Basis changes. vec -> vech applies D_d^T to eta2 (eta2 is symmetrised
// first); vech -> vec applies D_d^{+T}.
GaussianVechParams to_vech(const GaussianVecParams& p);
GaussianVecParams to_vec(const GaussianVechParams& p);

// Throws DegenerateError for improper parameters.
ShapeScale invchisq_to_shape_scale(const InvChiSqParams& p);
InvChiSqParams invchisq_from_shape_scale(double shape, double scale);

// E(1/x) = (eta1 + 1)/eta2 = xi/lambda. Throws DegenerateError if eta2 == 0.
double invchisq_mean_reciprocal(const InvChiSqParams& p);

}  // namespace bfpca::expfam
