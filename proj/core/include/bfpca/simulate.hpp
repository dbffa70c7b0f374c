#pragma once

// Synthetic curves with a known mean, two eigenfunctions and Gaussian
// scores, plus the integrated squared error used to score fits.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "bfpca/dataset.hpp"

namespace bfpca {

struct SimConfig {
  int n = 36;
  int t_min = 20;  // observations per curve, uniform on {t_min, ..., t_max}
  int t_max = 30;
  double noise_var = 1.0;
  Eigen::Vector2d score_var{1.0, 0.25};
  std::uint64_t seed = 1;

  // n >= 1; 2 <= t_min <= t_max <= 10^4; noise_var > 0; score variances
  // positive and descending.
  void validate() const;
};

struct SimResult {
  FunctionalDataset data;
  Eigen::MatrixXd scores;  // n x 2 true scores
};

// mu(t) = 3 sin(pi t).
double true_mean(double t);
// psi_1(t) = sqrt(2) sin(2 pi t), psi_2(t) = sqrt(2) cos(2 pi t); l in {0, 1}.
double true_eigenfunction(int l, double t);
Eigen::VectorXd true_mean(const Eigen::VectorXd& grid);
// n_g x 2.
Eigen::MatrixXd true_eigenfunctions(const Eigen::VectorXd& grid);

// Times are i.i.d. Uniform(0, 1), sorted within each curve.
SimResult generate(const SimConfig& config, std::mt19937_64& rng);
// Seeds a std::mt19937_64 with config.seed.
SimResult generate(const SimConfig& config);

// Trapezoid approximation of int_0^1 (f - f_hat)^2.
double ise(const Eigen::VectorXd& f_true, const Eigen::VectorXd& f_hat, const Eigen::VectorXd& grid);

}  // namespace bfpca
