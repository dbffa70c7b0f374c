#include "bfpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bfpca/errors.hpp"
#include "bfpca/quadrature.hpp"

namespace bfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void SimConfig::validate() const {
  if (n < 1) throw ValidationError("simulation needs n >= 1, got " + std::to_string(n));
  if (t_min < 2 || t_max < t_min || t_max > 10000) {
    throw ValidationError("observation-count range {" + std::to_string(t_min) + ".." +
                          std::to_string(t_max) + "} must lie within [2, 10000]");
  }
  if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
    throw ValidationError("noise variance must be positive");
  }
  if (!(score_var(0) >= score_var(1) && score_var(1) > 0.0) || !score_var.allFinite()) {
    throw ValidationError("score variances must be positive and descending");
  }
}

double true_mean(double t) { return 3.0 * std::sin(std::numbers::pi * t); }

double true_eigenfunction(int l, double t) {
  const double arg = 2.0 * std::numbers::pi * t;
  switch (l) {
    case 0:
      return std::numbers::sqrt2 * std::sin(arg);
    case 1:
      return std::numbers::sqrt2 * std::cos(arg);
    default:
      throw ValidationError("true eigenfunction index must be 0 or 1, got " + std::to_string(l));
  }
}

VectorXd true_mean(const VectorXd& grid) { return grid.unaryExpr([](double t) { return true_mean(t); }); }

MatrixXd true_eigenfunctions(const VectorXd& grid) {
  MatrixXd out(grid.size(), 2);
  for (Index g = 0; g < grid.size(); ++g) {
    out(g, 0) = true_eigenfunction(0, grid(g));
    out(g, 1) = true_eigenfunction(1, grid(g));
  }
  return out;
}

SimResult generate(const SimConfig& config, std::mt19937_64& rng) {
  config.validate();
  std::uniform_int_distribution<int> count(config.t_min, config.t_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_sd = std::sqrt(config.noise_var);
  const Eigen::Vector2d score_sd = config.score_var.cwiseSqrt();

  SimResult out;
  out.scores.resize(config.n, 2);
  out.data.curves.reserve(static_cast<std::size_t>(config.n));
  for (int i = 0; i < config.n; ++i) {
    const int num_obs = count(rng);
    Curve curve;
    curve.id = std::to_string(i);
    curve.t.resize(num_obs);
    for (int j = 0; j < num_obs; ++j) curve.t(j) = unit(rng);
    std::sort(curve.t.begin(), curve.t.end());
    const double z1 = score_sd(0) * normal(rng);
    const double z2 = score_sd(1) * normal(rng);
    out.scores(i, 0) = z1;
    out.scores(i, 1) = z2;
    curve.y.resize(num_obs);
    for (int j = 0; j < num_obs; ++j) {
      const double t = curve.t(j);
      curve.y(j) = true_mean(t) + z1 * true_eigenfunction(0, t) + z2 * true_eigenfunction(1, t) +
                   noise_sd * normal(rng);
    }
    out.data.curves.push_back(std::move(curve));
  }
  return out;
}

SimResult generate(const SimConfig& config) {
  std::mt19937_64 rng(config.seed);
  return generate(config, rng);
}

double ise(const VectorXd& f_true, const VectorXd& f_hat, const VectorXd& grid) {
  if (f_true.size() != f_hat.size() || f_true.size() != grid.size()) {
    throw ValidationError("ise: lengths " + std::to_string(f_true.size()) + ", " +
                          std::to_string(f_hat.size()) + " and grid " + std::to_string(grid.size()) +
                          " differ");
  }
  return trapezoid((f_true - f_hat).cwiseAbs2(), grid);
}

}  // namespace bfpca
