#include "bfpca/graph.hpp"

#include <algorithm>

#include "bfpca/errors.hpp"

namespace bfpca {

using Eigen::Index;
using Eigen::VectorXd;

std::string to_string(Family family) {
  switch (family) {
    case Family::kGaussianVec:
      return "gaussian-vec";
    case Family::kGaussianVech:
      return "gaussian-vech";
    case Family::kInvChiSq:
      return "inverse-chi-squared";
  }
  return "unknown";
}

Index eta_length(Family family, Index dim) {
  switch (family) {
    case Family::kGaussianVec:
      return dim + dim * dim;
    case Family::kGaussianVech:
      return dim + expfam::vech_length(dim);
    case Family::kInvChiSq:
      return 2;
  }
  return 0;
}

NaturalParams::NaturalParams(Family family, Index dim, VectorXd eta)
    : family_(family), dim_(dim), eta_(std::move(eta)) {
  if (family == Family::kInvChiSq && dim != 1) {
    throw ValidationError("inverse-chi-squared parameters are scalar");
  }
  if (eta_.size() != eta_length(family, dim)) {
    throw ValidationError("natural parameter length " + std::to_string(eta_.size()) + " does not fit " +
                          to_string(family) + " of dimension " + std::to_string(dim));
  }
}

NaturalParams NaturalParams::zeros(Family family, Index dim) {
  return {family, dim, VectorXd::Zero(eta_length(family, dim))};
}

NaturalParams NaturalParams::from(const expfam::GaussianVecParams& p) {
  VectorXd eta(p.eta1.size() + p.eta2.size());
  eta << p.eta1, p.eta2;
  return {Family::kGaussianVec, p.eta1.size(), std::move(eta)};
}

NaturalParams NaturalParams::from(const expfam::GaussianVechParams& p) {
  VectorXd eta(p.eta1.size() + p.eta2.size());
  eta << p.eta1, p.eta2;
  return {Family::kGaussianVech, p.eta1.size(), std::move(eta)};
}

NaturalParams NaturalParams::from(const expfam::InvChiSqParams& p) {
  return {Family::kInvChiSq, 1, VectorXd{{p.eta1, p.eta2}}};
}

expfam::GaussianVecParams NaturalParams::as_gaussian_vec() const {
  if (family_ != Family::kGaussianVec) {
    throw ValidationError("expected gaussian-vec parameters, have " + to_string(family_));
  }
  return {eta_.head(dim_), eta_.tail(dim_ * dim_)};
}

expfam::GaussianVechParams NaturalParams::as_gaussian_vech() const {
  if (family_ != Family::kGaussianVech) {
    throw ValidationError("expected gaussian-vech parameters, have " + to_string(family_));
  }
  return {eta_.head(dim_), eta_.tail(expfam::vech_length(dim_))};
}

expfam::InvChiSqParams NaturalParams::as_invchisq() const {
  if (family_ != Family::kInvChiSq) {
    throw ValidationError("expected inverse-chi-squared parameters, have " + to_string(family_));
  }
  return {eta_(0), eta_(1)};
}

NaturalParams& NaturalParams::operator+=(const NaturalParams& other) {
  if (family_ != other.family_ || dim_ != other.dim_) {
    throw ValidationError("cannot add " + to_string(family_) + "(" + std::to_string(dim_) + ") and " +
                          to_string(other.family_) + "(" + std::to_string(other.dim_) + ")");
  }
  eta_ += other.eta_;
  return *this;
}

std::string to_string(const NodeId& node) {
  const auto idx = [&](const char* name) { return std::string(name) + "[" + std::to_string(node.index) + "]"; };
  switch (node.kind) {
    case NodeKind::kNu:
      return "nu";
    case NodeKind::kZeta:
      return idx("zeta");
    case NodeKind::kSigmaSqEps:
      return "sigsq_eps";
    case NodeKind::kAEps:
      return "a_eps";
    case NodeKind::kSigmaSqMu:
      return "sigsq_mu";
    case NodeKind::kAMu:
      return "a_mu";
    case NodeKind::kSigmaSqPsi:
      return idx("sigsq_psi");
    case NodeKind::kAPsi:
      return idx("a_psi");
  }
  return "?";
}

std::string to_string(const FactorId& factor) {
  const auto idx = [&](const char* name) { return std::string(name) + "[" + std::to_string(factor.index) + "]"; };
  switch (factor.kind) {
    case FactorKind::kLikelihood:
      return "p(y|nu,zeta,sigsq_eps)";
    case FactorKind::kPenalization:
      return "p(nu|sigsq_mu,sigsq_psi)";
    case FactorKind::kZetaPrior:
      return idx("p(zeta)");
    case FactorKind::kIterEps:
      return "p(sigsq_eps|a_eps)";
    case FactorKind::kPriorAEps:
      return "p(a_eps)";
    case FactorKind::kIterMu:
      return "p(sigsq_mu|a_mu)";
    case FactorKind::kPriorAMu:
      return "p(a_mu)";
    case FactorKind::kIterPsi:
      return idx("p(sigsq_psi|a_psi)");
    case FactorKind::kPriorAPsi:
      return idx("p(a_psi)");
  }
  return "?";
}

std::string to_string(const EdgeKey& key) {
  return key.direction == Direction::kFactorToNode
             ? to_string(key.factor) + " -> " + to_string(key.node)
             : to_string(key.node) + " -> " + to_string(key.factor);
}

FactorGraph::FactorGraph(int num_curves, int num_eigen, int num_splines)
    : num_curves_(num_curves), num_eigen_(num_eigen), num_splines_(num_splines) {
  if (num_curves < 1) throw ValidationError("factor graph needs at least one curve");
  if (num_eigen < 1) throw ValidationError("factor graph needs L >= 1");
  if (num_splines < 1) throw ValidationError("factor graph needs K >= 1");

  nodes_.push_back(NodeId::nu());
  for (int i = 0; i < num_curves; ++i) nodes_.push_back(NodeId::zeta(i));
  nodes_.push_back(NodeId::sigsq_eps());
  nodes_.push_back(NodeId::a_eps());
  nodes_.push_back(NodeId::sigsq_mu());
  nodes_.push_back(NodeId::a_mu());
  for (int l = 0; l < num_eigen; ++l) {
    nodes_.push_back(NodeId::sigsq_psi(l));
    nodes_.push_back(NodeId::a_psi(l));
  }

  const auto lik = FactorId::likelihood();
  connect(lik, NodeId::nu());
  for (int i = 0; i < num_curves; ++i) connect(lik, NodeId::zeta(i));
  connect(lik, NodeId::sigsq_eps());

  const auto pen = FactorId::penalization();
  connect(pen, NodeId::nu());
  connect(pen, NodeId::sigsq_mu());
  for (int l = 0; l < num_eigen; ++l) connect(pen, NodeId::sigsq_psi(l));

  for (int i = 0; i < num_curves; ++i) connect(FactorId::zeta_prior(i), NodeId::zeta(i));

  connect(FactorId::iter_eps(), NodeId::sigsq_eps());
  connect(FactorId::iter_eps(), NodeId::a_eps());
  connect(FactorId::prior_a_eps(), NodeId::a_eps());

  connect(FactorId::iter_mu(), NodeId::sigsq_mu());
  connect(FactorId::iter_mu(), NodeId::a_mu());
  connect(FactorId::prior_a_mu(), NodeId::a_mu());

  for (int l = 0; l < num_eigen; ++l) {
    connect(FactorId::iter_psi(l), NodeId::sigsq_psi(l));
    connect(FactorId::iter_psi(l), NodeId::a_psi(l));
    connect(FactorId::prior_a_psi(l), NodeId::a_psi(l));
  }
}

void FactorGraph::connect(const FactorId& factor, const NodeId& node) {
  if (!factor_neighbors_.contains(factor)) factors_.push_back(factor);
  factor_neighbors_[factor].push_back(node);
  node_neighbors_[node].push_back(factor);
}

Index FactorGraph::nu_dim() const {
  return static_cast<Index>(num_eigen_ + 1) * static_cast<Index>(num_splines_ + 2);
}

const std::vector<FactorId>& FactorGraph::neighbors(const NodeId& node) const {
  const auto it = node_neighbors_.find(node);
  if (it == node_neighbors_.end()) throw ValidationError("unknown node " + to_string(node));
  return it->second;
}

const std::vector<NodeId>& FactorGraph::neighbors(const FactorId& factor) const {
  const auto it = factor_neighbors_.find(factor);
  if (it == factor_neighbors_.end()) throw ValidationError("unknown factor " + to_string(factor));
  return it->second;
}

bool FactorGraph::connected(const FactorId& factor, const NodeId& node) const {
  const auto it = factor_neighbors_.find(factor);
  return it != factor_neighbors_.end() &&
         std::find(it->second.begin(), it->second.end(), node) != it->second.end();
}

Family FactorGraph::family(const NodeId& node) const {
  switch (node.kind) {
    case NodeKind::kNu:
      return Family::kGaussianVec;
    case NodeKind::kZeta:
      return Family::kGaussianVech;
    default:
      return Family::kInvChiSq;
  }
}

Index FactorGraph::dim(const NodeId& node) const {
  switch (node.kind) {
    case NodeKind::kNu:
      return nu_dim();
    case NodeKind::kZeta:
      return num_eigen_;
    default:
      return 1;
  }
}

void MessageStore::set(const FactorId& factor, const NodeId& node, Direction direction,
                       Message message) {
  if (!graph_->connected(factor, node)) {
    throw ValidationError("no edge between " + to_string(factor) + " and " + to_string(node));
  }
  if (message.params.family() != graph_->family(node) || message.params.dim() != graph_->dim(node)) {
    throw ValidationError("message on " + to_string(EdgeKey{factor, node, direction}) + " has " +
                          to_string(message.params.family()) + "(" +
                          std::to_string(message.params.dim()) + "), node expects " +
                          to_string(graph_->family(node)) + "(" + std::to_string(graph_->dim(node)) +
                          ")");
  }
  messages_.insert_or_assign(EdgeKey{factor, node, direction}, std::move(message));
}

const Message& MessageStore::get(const FactorId& factor, const NodeId& node,
                                 Direction direction) const {
  const EdgeKey key{factor, node, direction};
  const auto it = messages_.find(key);
  if (it == messages_.end()) {
    throw UninitializedGraphError("missing message " + to_string(key));
  }
  return it->second;
}

bool MessageStore::contains(const FactorId& factor, const NodeId& node, Direction direction) const {
  return messages_.contains(EdgeKey{factor, node, direction});
}

Message stochastic_to_factor(const MessageStore& store, const NodeId& node, const FactorId& target) {
  const FactorGraph& graph = store.graph();
  if (!graph.connected(target, node)) {
    throw ValidationError("no edge between " + to_string(target) + " and " + to_string(node));
  }
  Message out{NaturalParams::zeros(graph.family(node), graph.dim(node)), std::nullopt};
  for (const FactorId& factor : graph.neighbors(node)) {
    if (factor == target) continue;
    const Message& incoming = store.to_node(factor, node);
    out.params += incoming.params;
    if (incoming.graph) {
      // Any diagonal-graph input makes the outgoing message diagonal.
      out.graph = (out.graph == GraphTag::kDiag || incoming.graph == GraphTag::kDiag)
                      ? GraphTag::kDiag
                      : GraphTag::kFull;
    }
  }
  return out;
}

void refresh_node_to_factor(MessageStore& store, const FactorId& factor) {
  for (const NodeId& node : store.graph().neighbors(factor)) {
    store.set(factor, node, Direction::kNodeToFactor, stochastic_to_factor(store, node, factor));
  }
}

NaturalParams q_natural_params(const MessageStore& store, const NodeId& node) {
  const FactorGraph& graph = store.graph();
  NaturalParams out = NaturalParams::zeros(graph.family(node), graph.dim(node));
  for (const FactorId& factor : graph.neighbors(node)) out += store.to_node(factor, node).params;
  return out;
}

NaturalParams npbf(const MessageStore& store, const FactorId& factor, const NodeId& node) {
  return store.to_node(factor, node).params + store.to_factor(factor, node).params;
}

}  // namespace bfpca
