#pragma once

#include <Eigen/Dense>

namespace bfpca {

// Composite trapezoid rule for samples f on an ascending grid.
double trapezoid(const Eigen::VectorXd& f, const Eigen::VectorXd& grid);

// Weights w with trapezoid(f, grid) == w.dot(f); grid ascending, size >= 2.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

// Trapezoid inner product <f, g> on a grid.
double trapezoid_inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                       const Eigen::VectorXd& grid);

// Equidistant grid on [0, 1] with n points; n >= 2.
Eigen::VectorXd unit_grid(Eigen::Index n);

}  // namespace bfpca
