#include "bfpca/quadrature.hpp"

#include "bfpca/errors.hpp"

namespace bfpca {

double trapezoid(const Eigen::VectorXd& f, const Eigen::VectorXd& grid) {
  if (f.size() != grid.size()) throw ValidationError("trapezoid: length mismatch");
  double total = 0.0;
  for (Eigen::Index k = 1; k < grid.size(); ++k) {
    total += 0.5 * (grid(k) - grid(k - 1)) * (f(k) + f(k - 1));
  }
  return total;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  if (grid.size() < 2) throw ValidationError("trapezoid_weights: need at least two points");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(grid.size());
  for (Eigen::Index k = 1; k < grid.size(); ++k) {
    const double half = 0.5 * (grid(k) - grid(k - 1));
    w(k - 1) += half;
    w(k) += half;
  }
  return w;
}

double trapezoid_inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                       const Eigen::VectorXd& grid) {
  if (f.size() != g.size()) throw ValidationError("trapezoid_inner: length mismatch");
  return trapezoid(f.cwiseProduct(g), grid);
}

Eigen::VectorXd unit_grid(Eigen::Index n) {
  if (n < 2) throw ValidationError("unit_grid: need at least two points");
  Eigen::VectorXd grid(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    grid(k) = static_cast<double>(k) / static_cast<double>(n - 1);
  }
  // Pin the right endpoint exactly.
  grid(n - 1) = 1.0;
  return grid;
}

}  // namespace bfpca
