#include "bfpca/expfam.hpp"

#include <cmath>
#include <string>

#include "bfpca/errors.hpp"

namespace bfpca::expfam {

VectorXd vec(const MatrixXd& a) {
  return Eigen::Map<const VectorXd>(a.data(), a.size());
}

MatrixXd vec_inverse(const VectorXd& v, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || rows * cols != v.size()) {
    throw ValidationError("vec_inverse: length " + std::to_string(v.size()) +
                          " does not match " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

MatrixXd vec_inverse(const VectorXd& v) {
  const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) {
    throw ValidationError("vec_inverse: length " + std::to_string(v.size()) +
                          " is not a perfect square");
  }
  return vec_inverse(v, d, d);
}

Index vech_length(Index d) { return d * (d + 1) / 2; }

Index dim_from_vech_length(Index v_len) {
  const auto d = static_cast<Index>(
      std::llround((std::sqrt(8.0 * static_cast<double>(v_len) + 1.0) - 1.0) / 2.0));
  if (vech_length(d) != v_len) {
    throw ValidationError("vech length " + std::to_string(v_len) + " is not triangular");
  }
  return d;
}

VectorXd vech(const MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw ValidationError("vech: matrix must be square, got " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()));
  }
  const Index d = a.rows();
  VectorXd out(vech_length(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) out(k++) = a(i, j);
  }
  return out;
}

MatrixXd vech_inverse(const VectorXd& v) {
  const Index d = dim_from_vech_length(v.size());
  MatrixXd out(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      out(i, j) = v(k);
      out(j, i) = v(k);
      ++k;
    }
  }
  return out;
}

MatrixXd duplication_matrix(Index d) {
  if (d < 1) throw ValidationError("duplication_matrix: d must be >= 1");
  MatrixXd dup = MatrixXd::Zero(d * d, vech_length(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      dup(j * d + i, k) = 1.0;
      dup(i * d + j, k) = 1.0;
      ++k;
    }
  }
  return dup;
}

MatrixXd duplication_pinv(Index d) {
  const MatrixXd dup = duplication_matrix(d);
  // D^T D is diagonal (1 on diagonal positions, 2 off-diagonal).
  const VectorXd counts = dup.colwise().sum();
  return counts.cwiseInverse().asDiagonal() * dup.transpose();
}

VectorXd duplication_transpose_times_vec(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw ValidationError("duplication_transpose_times_vec: non-square");
  const Index d = a.rows();
  VectorXd out(vech_length(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      out(k++) = (i == j) ? a(i, i) : a(i, j) + a(j, i);
    }
  }
  return out;
}

MatrixXd duplication_pinv_transpose_reshape(const VectorXd& v) {
  const Index d = dim_from_vech_length(v.size());
  MatrixXd out(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      const double value = (i == j) ? v(k) : 0.5 * v(k);
      out(i, j) = value;
      out(j, i) = value;
      ++k;
    }
  }
  return out;
}

MatrixXd invert_precision(const MatrixXd& precision, const char* what) {
  const MatrixXd sym = 0.5 * (precision + precision.transpose());
  if (!sym.allFinite()) {
    throw DegenerateError(std::string(what) + ": non-finite precision matrix");
  }
  const Index d = sym.rows();
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    MatrixXd inv = llt.solve(MatrixXd::Identity(d, d));
    return 0.5 * (inv + inv.transpose());
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw DegenerateError(std::string(what) + ": eigen-decomposition failed");
  }
  const VectorXd& values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  const double smallest = values.minCoeff();
  if (!(largest > 0.0) || smallest < 1e-10 * largest) {
    throw DegenerateError(std::string(what) + ": precision not positive definite (eigenvalues in [" +
                          std::to_string(smallest) + ", " + std::to_string(largest) + "])");
  }
  const MatrixXd& vecs = eig.eigenvectors();
  return vecs * values.cwiseInverse().asDiagonal() * vecs.transpose();
}

namespace {

GaussianMoments moments_from_precision(const VectorXd& eta1, const MatrixXd& half_neg_precision) {
  // half_neg_precision = vec^{-1}(eta2) = -1/2 Sigma^{-1}
  const MatrixXd precision = -2.0 * half_neg_precision;
  GaussianMoments m;
  m.cov = invert_precision(precision, "gaussian natural parameters");
  m.mean = m.cov * eta1;
  return m;
}

}  // namespace

GaussianMoments gaussian_vec_to_moments(const GaussianVecParams& p) {
  const Index d = p.eta1.size();
  if (p.eta2.size() != d * d) {
    throw ValidationError("gaussian_vec_to_moments: eta2 length " + std::to_string(p.eta2.size()) +
                          " != d^2 = " + std::to_string(d * d));
  }
  return moments_from_precision(p.eta1, vec_inverse(p.eta2, d, d));
}

GaussianVecParams gaussian_moments_to_vec(const VectorXd& mean, const MatrixXd& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError("gaussian_moments_to_vec: dimension mismatch");
  }
  const MatrixXd precision = invert_precision(cov, "covariance");
  return {precision * mean, -0.5 * vec(precision)};
}

GaussianMoments gaussian_vech_to_moments(const GaussianVechParams& p) {
  const Index d = p.eta1.size();
  if (p.eta2.size() != vech_length(d)) {
    throw ValidationError("gaussian_vech_to_moments: eta2 length " +
                          std::to_string(p.eta2.size()) + " != d(d+1)/2");
  }
  return moments_from_precision(p.eta1, duplication_pinv_transpose_reshape(p.eta2));
}

GaussianVechParams gaussian_moments_to_vech(const VectorXd& mean, const MatrixXd& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError("gaussian_moments_to_vech: dimension mismatch");
  }
  const MatrixXd precision = invert_precision(cov, "covariance");
  return {precision * mean, -0.5 * duplication_transpose_times_vec(precision)};
}

GaussianVechParams to_vech(const GaussianVecParams& p) {
  const Index d = p.eta1.size();
  const MatrixXd m = vec_inverse(p.eta2, d, d);
  return {p.eta1, duplication_transpose_times_vec(0.5 * (m + m.transpose()))};
}

GaussianVecParams to_vec(const GaussianVechParams& p) {
  return {p.eta1, vec(duplication_pinv_transpose_reshape(p.eta2))};
}

ShapeScale invchisq_to_shape_scale(const InvChiSqParams& p) {
  if (!p.is_proper()) {
    throw DegenerateError("inverse-chi-squared parameters (" + std::to_string(p.eta1) + ", " +
                          std::to_string(p.eta2) + ") are improper");
  }
  return {-2.0 * p.eta1 - 2.0, -2.0 * p.eta2};
}

InvChiSqParams invchisq_from_shape_scale(double shape, double scale) {
  return {-0.5 * (shape + 2.0), -0.5 * scale};
}

double invchisq_mean_reciprocal(const InvChiSqParams& p) {
  if (p.eta2 == 0.0) {
    throw DegenerateError("inverse-chi-squared mean of reciprocal undefined: eta2 == 0");
  }
  return (p.eta1 + 1.0) / p.eta2;
}

}  // namespace bfpca::expfam
