#pragma once

// Variational message passing driver: initialisation, the fixed-order sweep
// over fragments, and convergence detection.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bfpca/dataset.hpp"
#include "bfpca/fragments.hpp"
#include "bfpca/graph.hpp"
#include "bfpca/splines.hpp"

namespace bfpca {

struct Hyperparameters {
  Eigen::Vector2d mu_beta = Eigen::Vector2d::Zero();
  double sigma_beta_var = 1e10;  // Sigma_beta = sigma_beta_var * I_2
  double a_eps = 1e5;
  double a_mu = 1e5;
  double a_psi = 1e5;            // shared by every psi_l
  double sigma_zeta_var = 1.0;   // Sigma_zeta = sigma_zeta_var * I_L

  bool operator==(const Hyperparameters&) const = default;
};

struct FitConfig {
  int num_eigen = 3;    // L
  int num_splines = 10; // K
  double tol = 1e-5;
  int max_iter = 5000;
  int grid_size = 1001; // n_g used by post-processing
  Hyperparameters hyper;
  std::uint64_t seed = 1;
  // When set (n x L), scores are held at these point masses: their messages
  // are never updated and they are excluded from the convergence metric.
  std::optional<Eigen::MatrixXd> frozen_scores;

  // Throws ValidationError unless L >= 1, K >= 3, tol > 0, max_iter >= 1,
  // n_g >= 101 and every hyperparameter is positive and finite.
  void validate() const;
};

struct VmpState {
  MessageStore store;
  int iterations = 0;
  std::vector<double> history;
  bool converged = false;
};

// max over nodes of ||eta_new - eta_old||_inf / (1 + ||eta_old||_inf) on the
// q-density natural parameters. Nodes listed in `skip` are ignored.
double convergence_metric(const MessageStore& prev, const MessageStore& curr,
                          const std::vector<NodeId>& skip = {});

/// Owns everything a fit derives from the data: basis, cached products and
/// the factor graph. Stateless across calls; every mutation happens on a
/// caller-owned VmpState.
class VmpEngine {
 public:
  VmpEngine(const FunctionalDataset& data, FitConfig config);

  const FitConfig& config() const { return config_; }
  const SplineBasis& basis() const { return basis_; }
  const LikelihoodCache& cache() const { return cache_; }
  const std::shared_ptr<const FactorGraph>& graph() const { return graph_; }

  // Every factor -> node and node -> factor message present and proper.
  VmpState initialize() const;

  // One pass over the fragments in fixed order. Throws DegenerateError with
  // the offending edge in the message.
  void sweep(VmpState& state) const;

  // Sweeps until the metric drops below tol or max_iter sweeps have run in
  // total. Returns immediately on an already converged state. Degenerate
  // messages are rethrown with the iteration number attached.
  void run(VmpState& state) const;

  // Metric restricted to the nodes that are actually updated.
  double metric(const MessageStore& prev, const MessageStore& curr) const;

  // Moments of q(zeta_i); honours frozen scores.
  expfam::GaussianMoments zeta_moments(const MessageStore& store, int i) const;

 private:
  void update_likelihood(MessageStore& store) const;
  void update_penalization(MessageStore& store) const;
  void update_iterated(MessageStore& store, const FactorId& iter, const NodeId& sigma,
                       const NodeId& a) const;
  void update_constant(MessageStore& store, const FactorId& factor) const;
  Message constant_message(const FactorId& factor) const;

  FitConfig config_;
  SplineBasis basis_;
  LikelihoodCache cache_;
  std::shared_ptr<const FactorGraph> graph_;
  std::vector<NodeId> frozen_nodes_;
};

// initialize + run.
VmpState fit(const FunctionalDataset& data, const FitConfig& config);

}  // namespace bfpca
