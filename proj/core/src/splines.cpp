#include "bfpca/splines.hpp"

#include <array>
#include <string>

#include "bfpca/errors.hpp"

namespace bfpca {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kDegree = 3;
constexpr double kMinKnotSpacing = 1e-3;
constexpr int kSimpsonPanels = 4;  // per inter-knot segment, 5 points

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// Values of all B-splines of degree 0..3 at x. table[p] has knots.size()-1-p
// entries.
std::array<VectorXd, kDegree + 1> bspline_table(const VectorXd& knots, double x) {
  const Index m = knots.size();
  std::array<VectorXd, kDegree + 1> table;
  table[0] = VectorXd::Zero(m - 1);

  // Locate the non-degenerate span containing x; x == 1 belongs to the last one.
  Index span = -1;
  for (Index j = 0; j + 1 < m; ++j) {
    if (knots(j) < knots(j + 1) && knots(j) <= x && x < knots(j + 1)) {
      span = j;
      break;
    }
  }
  if (span < 0) {
    for (Index j = m - 2; j >= 0; --j) {
      if (knots(j) < knots(j + 1)) {
        span = j;
        break;
      }
    }
  }
  table[0](span) = 1.0;

  for (int p = 1; p <= kDegree; ++p) {
    const VectorXd& prev = table[p - 1];
    VectorXd cur = VectorXd::Zero(m - 1 - p);
    for (Index j = 0; j < cur.size(); ++j) {
      const double left = safe_ratio(x - knots(j), knots(j + p) - knots(j));
      const double right = safe_ratio(knots(j + p + 1) - x, knots(j + p + 1) - knots(j + 1));
      cur(j) = left * prev(j) + right * prev(j + 1);
    }
    table[p] = std::move(cur);
  }
  return table;
}

}  // namespace

SplineBasis SplineBasis::build(Index num_basis) {
  if (num_basis < 3) {
    throw ValidationError("spline basis needs K >= 3, got " + std::to_string(num_basis));
  }
  const Index num_interior = num_basis - 2;
  const double spacing = 1.0 / static_cast<double>(num_interior + 1);
  if (spacing < kMinKnotSpacing) {
    throw ValidationError("spline basis K = " + std::to_string(num_basis) +
                          " gives knot spacing below " + std::to_string(kMinKnotSpacing));
  }

  SplineBasis basis;
  basis.interior_knots_.resize(num_interior);
  for (Index j = 0; j < num_interior; ++j) {
    basis.interior_knots_(j) = static_cast<double>(j + 1) * spacing;
  }
  basis.knots_.resize(num_interior + 2 * (kDegree + 1));
  basis.knots_.head(kDegree + 1).setZero();
  basis.knots_.segment(kDegree + 1, num_interior) = basis.interior_knots_;
  basis.knots_.tail(kDegree + 1).setOnes();

  const MatrixXd omega = basis.raw_penalty();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(omega);
  if (eig.info() != Eigen::Success) throw Error("spline penalty eigen-decomposition failed");

  // Eigenvalues ascend; the two smallest span the linear null space.
  const VectorXd values = eig.eigenvalues().tail(num_basis).reverse();
  const MatrixXd vectors = eig.eigenvectors().rightCols(num_basis).rowwise().reverse();
  if (values.minCoeff() <= 1e-10 * values.maxCoeff()) {
    throw ValidationError("spline penalty has fewer than K positive eigenvalues for K = " +
                          std::to_string(num_basis));
  }
  basis.transform_ = vectors * values.cwiseSqrt().cwiseInverse().asDiagonal();
  return basis;
}

VectorXd SplineBasis::raw(double t) const { return bspline_table(knots_, t)[kDegree]; }

VectorXd SplineBasis::raw_second_derivative(double t) const {
  const auto table = bspline_table(knots_, t);
  const VectorXd& b1 = table[1];
  const Index m = knots_.size();
  const Index n2 = m - 1 - 2;
  const Index n3 = m - 1 - 3;
  // First derivatives of the quadratic splines.
  VectorXd d2(n2);
  for (Index j = 0; j < n2; ++j) {
    d2(j) = 2.0 * (safe_ratio(b1(j), knots_(j + 2) - knots_(j)) -
                   safe_ratio(b1(j + 1), knots_(j + 3) - knots_(j + 1)));
  }
  VectorXd out(n3);
  for (Index j = 0; j < n3; ++j) {
    out(j) = 3.0 * (safe_ratio(d2(j), knots_(j + 3) - knots_(j)) -
                    safe_ratio(d2(j + 1), knots_(j + 4) - knots_(j + 1)));
  }
  return out;
}

VectorXd SplineBasis::evaluate(double t) const { return transform_.transpose() * raw(t); }

VectorXd SplineBasis::evaluate_second_derivative(double t) const {
  return transform_.transpose() * raw_second_derivative(t);
}

MatrixXd SplineBasis::evaluate(const VectorXd& times) const {
  MatrixXd out(times.size(), size());
  for (Index i = 0; i < times.size(); ++i) out.row(i) = evaluate(times(i)).transpose();
  return out;
}

MatrixXd SplineBasis::raw_penalty() const {
  // B'' is piecewise linear, so the integrand is piecewise quadratic and
  // Simpson's rule is exact on each inter-knot segment.
  VectorXd breaks(interior_knots_.size() + 2);
  breaks(0) = 0.0;
  breaks.segment(1, interior_knots_.size()) = interior_knots_;
  breaks(breaks.size() - 1) = 1.0;

  const Index raw_size = knots_.size() - (kDegree + 1);
  MatrixXd omega = MatrixXd::Zero(raw_size, raw_size);
  for (Index s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks(s);
    const double h = (breaks(s + 1) - a) / kSimpsonPanels;
    for (int k = 0; k <= kSimpsonPanels; ++k) {
      const double weight = (k == 0 || k == kSimpsonPanels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      const VectorXd d = raw_second_derivative(a + k * h);
      omega.noalias() += (weight * h / 3.0) * d * d.transpose();
    }
  }
  return 0.5 * (omega + omega.transpose());
}

MatrixXd design_matrix(const VectorXd& times, const SplineBasis& basis) {
  const Index k = basis.size();
  MatrixXd c(times.size(), 2 + k);
  for (Index i = 0; i < times.size(); ++i) {
    const double t = times(i);
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ValidationError("design_matrix: time " + std::to_string(t) + " outside [0, 1]");
    }
    c(i, 0) = 1.0;
    c(i, 1) = t;
    c.row(i).tail(k) = basis.evaluate(t).transpose();
  }
  return c;
}

}  // namespace bfpca
