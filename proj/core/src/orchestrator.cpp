#include "bfpca/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bfpca/errors.hpp"

namespace bfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInitVariance = 100.0;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ValidationError(std::string(name) + " must be positive and finite, got " +
                          std::to_string(value));
  }
}

FitConfig validated(FitConfig config) {
  config.validate();
  return config;
}

LikelihoodCache build_cache(const FunctionalDataset& data, const SplineBasis& basis, int num_eigen) {
  data.validate();
  std::vector<MatrixXd> designs;
  std::vector<VectorXd> responses;
  designs.reserve(data.size());
  responses.reserve(data.size());
  for (const Curve& c : data.curves) {
    designs.push_back(design_matrix(c.t, basis));
    responses.push_back(c.y);
  }
  return make_likelihood_cache(designs, responses, num_eigen);
}

std::string edge_label(const FactorId& factor, const NodeId& node) {
  return to_string(factor) + " <-> " + to_string(node);
}

// Runs fn and prefixes any DegenerateError with the edge it concerns.
template <class F>
auto on_edge(const FactorId& factor, const NodeId& node, F&& fn) {
  try {
    return fn();
  } catch (const DegenerateError& e) {
    throw DegenerateError(edge_label(factor, node) + ": " + e.what());
  }
}

Message variance_init_message() {
  // Alone, this message implies E(1/x) = 1.
  return {NaturalParams::from(expfam::InvChiSqParams{-1.5, -0.5}), GraphTag::kFull};
}

double recip_from_npbf(const MessageStore& store, const FactorId& factor, const NodeId& node) {
  return on_edge(factor, node, [&] {
    const double value = expfam::invchisq_mean_reciprocal(npbf(store, factor, node).as_invchisq());
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw DegenerateError("E(1/x) = " + std::to_string(value) + " is not positive");
    }
    return value;
  });
}

}  // namespace

void FitConfig::validate() const {
  if (num_eigen < 1) throw ValidationError("L (num_eigen) must be >= 1, got " + std::to_string(num_eigen));
  if (num_splines < 3) {
    throw ValidationError("K (num_splines) must be >= 3, got " + std::to_string(num_splines));
  }
  require_positive(tol, "tol");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1, got " + std::to_string(max_iter));
  if (grid_size < 101) {
    throw ValidationError("grid_size must be >= 101, got " + std::to_string(grid_size));
  }
  if (!hyper.mu_beta.allFinite()) throw ValidationError("mu_beta must be finite");
  require_positive(hyper.sigma_beta_var, "sigma_beta_var");
  require_positive(hyper.a_eps, "A_eps");
  require_positive(hyper.a_mu, "A_mu");
  require_positive(hyper.a_psi, "A_psi");
  require_positive(hyper.sigma_zeta_var, "sigma_zeta_var");
  if (frozen_scores && (frozen_scores->cols() != num_eigen || !frozen_scores->allFinite())) {
    throw ValidationError("frozen_scores must be finite with L columns");
  }
}

double convergence_metric(const MessageStore& prev, const MessageStore& curr,
                          const std::vector<NodeId>& skip) {
  double worst = 0.0;
  for (const NodeId& node : curr.graph().nodes()) {
    if (std::find(skip.begin(), skip.end(), node) != skip.end()) continue;
    const VectorXd old_eta = q_natural_params(prev, node).eta();
    const VectorXd new_eta = q_natural_params(curr, node).eta();
    const double rel = (new_eta - old_eta).lpNorm<Eigen::Infinity>() /
                       (1.0 + old_eta.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, rel);
  }
  return worst;
}

VmpEngine::VmpEngine(const FunctionalDataset& data, FitConfig config)
    : config_(validated(std::move(config))),
      basis_(SplineBasis::build(config_.num_splines)),
      cache_(build_cache(data, basis_, config_.num_eigen)),
      graph_(std::make_shared<const FactorGraph>(static_cast<int>(data.size()), config_.num_eigen,
                                                 config_.num_splines)) {
  if (config_.frozen_scores) {
    if (config_.frozen_scores->rows() != static_cast<Index>(data.size())) {
      throw ValidationError("frozen_scores has " + std::to_string(config_.frozen_scores->rows()) +
                            " rows for " + std::to_string(data.size()) + " curves");
    }
    for (int i = 0; i < graph_->num_curves(); ++i) frozen_nodes_.push_back(NodeId::zeta(i));
  }
}

Message VmpEngine::constant_message(const FactorId& factor) const {
  const Hyperparameters& h = config_.hyper;
  switch (factor.kind) {
    case FactorKind::kZetaPrior: {
      const Index l = config_.num_eigen;
      return gaussian_prior_message(VectorXd::Zero(l), h.sigma_zeta_var * MatrixXd::Identity(l, l),
                                    GaussianBasis::kVech);
    }
    case FactorKind::kPriorAEps:
      return igw_prior_message(h.a_eps);
    case FactorKind::kPriorAMu:
      return igw_prior_message(h.a_mu);
    case FactorKind::kPriorAPsi:
      return igw_prior_message(h.a_psi);
    default:
      throw ValidationError(to_string(factor) + " does not emit a constant message");
  }
}

VmpState VmpEngine::initialize() const {
  VmpState state{MessageStore(graph_), 0, {}, false};
  MessageStore& store = state.store;
  const Index d = graph_->nu_dim();
  const Index l = config_.num_eigen;

  const Message nu_init = gaussian_prior_message(
      VectorXd::Zero(d), kInitVariance * MatrixXd::Identity(d, d), GaussianBasis::kVec);
  store.set_to_node(FactorId::likelihood(), NodeId::nu(), nu_init);
  store.set_to_node(FactorId::penalization(), NodeId::nu(), nu_init);

  // Random score means break the symmetry under which every eigenfunction
  // mean stays at zero.
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(kInitVariance));
  const MatrixXd zeta_cov = kInitVariance * MatrixXd::Identity(l, l);
  for (int i = 0; i < graph_->num_curves(); ++i) {
    VectorXd mean(l);
    for (Index k = 0; k < l; ++k) mean(k) = normal(rng);
    store.set_to_node(FactorId::likelihood(), NodeId::zeta(i),
                      gaussian_prior_message(mean, zeta_cov, GaussianBasis::kVech));
    store.set_to_node(FactorId::zeta_prior(i), NodeId::zeta(i),
                      constant_message(FactorId::zeta_prior(i)));
  }

  const Message var_init = variance_init_message();
  store.set_to_node(FactorId::likelihood(), NodeId::sigsq_eps(), var_init);
  store.set_to_node(FactorId::iter_eps(), NodeId::sigsq_eps(), var_init);
  store.set_to_node(FactorId::iter_eps(), NodeId::a_eps(), var_init);
  store.set_to_node(FactorId::prior_a_eps(), NodeId::a_eps(), constant_message(FactorId::prior_a_eps()));

  store.set_to_node(FactorId::penalization(), NodeId::sigsq_mu(), var_init);
  store.set_to_node(FactorId::iter_mu(), NodeId::sigsq_mu(), var_init);
  store.set_to_node(FactorId::iter_mu(), NodeId::a_mu(), var_init);
  store.set_to_node(FactorId::prior_a_mu(), NodeId::a_mu(), constant_message(FactorId::prior_a_mu()));

  for (int k = 0; k < config_.num_eigen; ++k) {
    store.set_to_node(FactorId::penalization(), NodeId::sigsq_psi(k), var_init);
    store.set_to_node(FactorId::iter_psi(k), NodeId::sigsq_psi(k), var_init);
    store.set_to_node(FactorId::iter_psi(k), NodeId::a_psi(k), var_init);
    store.set_to_node(FactorId::prior_a_psi(k), NodeId::a_psi(k),
                      constant_message(FactorId::prior_a_psi(k)));
  }

  for (const FactorId& factor : graph_->factors()) refresh_node_to_factor(store, factor);
  return state;
}

expfam::GaussianMoments VmpEngine::zeta_moments(const MessageStore& store, int i) const {
  if (config_.frozen_scores) {
    const Index l = config_.num_eigen;
    return {config_.frozen_scores->row(i).transpose(), MatrixXd::Zero(l, l)};
  }
  const FactorId lik = FactorId::likelihood();
  return on_edge(lik, NodeId::zeta(i), [&] {
    return expfam::gaussian_vech_to_moments(npbf(store, lik, NodeId::zeta(i)).as_gaussian_vech());
  });
}

void VmpEngine::update_likelihood(MessageStore& store) const {
  const FactorId lik = FactorId::likelihood();
  refresh_node_to_factor(store, lik);

  // Expectations are re-read after each message so that nu, the scores and
  // sigsq_eps are updated in turn rather than from one shared snapshot.
  const auto expectations = [&] {
    LikelihoodInputs inputs;
    inputs.nu = on_edge(lik, NodeId::nu(), [&] {
      return expfam::gaussian_vec_to_moments(npbf(store, lik, NodeId::nu()).as_gaussian_vec());
    });
    inputs.zeta.reserve(static_cast<std::size_t>(graph_->num_curves()));
    for (int i = 0; i < graph_->num_curves(); ++i) inputs.zeta.push_back(zeta_moments(store, i));
    inputs.recip_sigsq_eps = recip_from_npbf(store, lik, NodeId::sigsq_eps());
    return lik_update_expectations(cache_, inputs);
  };

  store.set_to_node(lik, NodeId::nu(), lik_message_to_nu(cache_, expectations()));
  if (!config_.frozen_scores) {
    const LikelihoodExpectations ex = expectations();
    for (int i = 0; i < graph_->num_curves(); ++i) {
      store.set_to_node(lik, NodeId::zeta(i), lik_message_to_zeta(cache_, ex, static_cast<std::size_t>(i)));
    }
  }
  store.set_to_node(lik, NodeId::sigsq_eps(), lik_message_to_sigsqeps(cache_, expectations()));
}

void VmpEngine::update_penalization(MessageStore& store) const {
  const FactorId pen = FactorId::penalization();
  refresh_node_to_factor(store, pen);

  PenalizationInputs inputs;
  inputs.nu = on_edge(pen, NodeId::nu(), [&] {
    return expfam::gaussian_vec_to_moments(npbf(store, pen, NodeId::nu()).as_gaussian_vec());
  });
  inputs.recip_sigsq_mu = recip_from_npbf(store, pen, NodeId::sigsq_mu());
  inputs.recip_sigsq_psi.resize(config_.num_eigen);
  for (int l = 0; l < config_.num_eigen; ++l) {
    inputs.recip_sigsq_psi(l) = recip_from_npbf(store, pen, NodeId::sigsq_psi(l));
  }
  inputs.mu_beta = config_.hyper.mu_beta;
  inputs.sigma_beta = config_.hyper.sigma_beta_var * MatrixXd::Identity(2, 2);

  PenalizationMessages out = pen_messages(inputs, config_.num_splines);
  store.set_to_node(pen, NodeId::nu(), std::move(out.to_nu));
  store.set_to_node(pen, NodeId::sigsq_mu(), std::move(out.to_sigsq_mu));
  for (int l = 0; l < config_.num_eigen; ++l) {
    store.set_to_node(pen, NodeId::sigsq_psi(l), std::move(out.to_sigsq_psi[static_cast<std::size_t>(l)]));
  }
}

void VmpEngine::update_iterated(MessageStore& store, const FactorId& iter, const NodeId& sigma,
                                const NodeId& a) const {
  refresh_node_to_factor(store, iter);
  const NaturalParams npbf_sigma = npbf(store, iter, sigma);
  const NaturalParams npbf_a = npbf(store, iter, a);
  IteratedIgwMessages out = on_edge(iter, sigma, [&] { return iterated_igw_messages(npbf_sigma, npbf_a); });
  store.set_to_node(iter, sigma, std::move(out.to_sigma));
  store.set_to_node(iter, a, std::move(out.to_a));
}

void VmpEngine::update_constant(MessageStore& store, const FactorId& factor) const {
  refresh_node_to_factor(store, factor);
  for (const NodeId& node : graph_->neighbors(factor)) store.set_to_node(factor, node, constant_message(factor));
}

void VmpEngine::sweep(VmpState& state) const {
  MessageStore& store = state.store;
  update_likelihood(store);
  update_iterated(store, FactorId::iter_eps(), NodeId::sigsq_eps(), NodeId::a_eps());
  update_constant(store, FactorId::prior_a_eps());
  update_penalization(store);
  for (int i = 0; i < graph_->num_curves(); ++i) update_constant(store, FactorId::zeta_prior(i));
  update_iterated(store, FactorId::iter_mu(), NodeId::sigsq_mu(), NodeId::a_mu());
  update_constant(store, FactorId::prior_a_mu());
  for (int l = 0; l < config_.num_eigen; ++l) {
    update_iterated(store, FactorId::iter_psi(l), NodeId::sigsq_psi(l), NodeId::a_psi(l));
    update_constant(store, FactorId::prior_a_psi(l));
  }
}

double VmpEngine::metric(const MessageStore& prev, const MessageStore& curr) const {
  return convergence_metric(prev, curr, frozen_nodes_);
}

void VmpEngine::run(VmpState& state) const {
  if (state.converged) return;
  while (state.iterations < config_.max_iter) {
    const MessageStore prev = state.store;
    try {
      sweep(state);
    } catch (const DegenerateError& e) {
      throw DegenerateError("iteration " + std::to_string(state.iterations + 1) + ": " + e.what());
    }
    ++state.iterations;
    const double m = metric(prev, state.store);
    if (!std::isfinite(m)) {
      throw DegenerateError("iteration " + std::to_string(state.iterations) +
                            ": non-finite convergence metric");
    }
    state.history.push_back(m);
    if (m < config_.tol) {
      state.converged = true;
      return;
    }
  }
}

VmpState fit(const FunctionalDataset& data, const FitConfig& config) {
  const VmpEngine engine(data, config);
  VmpState state = engine.initialize();
  engine.run(state);
  return state;
}

}  // namespace bfpca
