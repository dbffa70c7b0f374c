#pragma once

// Factor graph of the Bayesian FPCA model and the generic message rules:
// stochastic-node-to-factor products, optimal q-density natural parameters
// and the two-directional edge sum.

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfpca/expfam.hpp"

namespace bfpca {

enum class Family { kGaussianVec, kGaussianVech, kInvChiSq };

std::string to_string(Family family);

/// Tagged natural-parameter vector. Gaussian families store eta1 followed by
/// eta2 in one flat vector; `dim` is the dimension of the random vector.
class NaturalParams {
 public:
  NaturalParams() = default;
  NaturalParams(Family family, Eigen::Index dim, Eigen::VectorXd eta);

  static NaturalParams zeros(Family family, Eigen::Index dim);
  static NaturalParams from(const expfam::GaussianVecParams& p);
  static NaturalParams from(const expfam::GaussianVechParams& p);
  static NaturalParams from(const expfam::InvChiSqParams& p);

  Family family() const { return family_; }
  Eigen::Index dim() const { return dim_; }
  const Eigen::VectorXd& eta() const { return eta_; }

  expfam::GaussianVecParams as_gaussian_vec() const;
  expfam::GaussianVechParams as_gaussian_vech() const;
  expfam::InvChiSqParams as_invchisq() const;

  // Component-wise sum; families and dimensions must agree.
  NaturalParams& operator+=(const NaturalParams& other);
  friend NaturalParams operator+(NaturalParams lhs, const NaturalParams& rhs) {
    lhs += rhs;
    return lhs;
  }

  bool operator==(const NaturalParams& other) const = default;

 private:
  Family family_ = Family::kInvChiSq;
  Eigen::Index dim_ = 1;
  Eigen::VectorXd eta_ = Eigen::VectorXd::Zero(2);
};

// Length of the flat eta vector for a family/dimension pair.
Eigen::Index eta_length(Family family, Eigen::Index dim);

enum class GraphTag { kFull, kDiag };

struct Message {
  NaturalParams params;
  std::optional<GraphTag> graph;

  bool operator==(const Message& other) const = default;
};

enum class NodeKind { kNu, kZeta, kSigmaSqEps, kAEps, kSigmaSqMu, kAMu, kSigmaSqPsi, kAPsi };

struct NodeId {
  NodeKind kind = NodeKind::kNu;
  int index = 0;  // curve index for zeta, component index for psi variances

  static NodeId nu() { return {NodeKind::kNu, 0}; }
  static NodeId zeta(int i) { return {NodeKind::kZeta, i}; }
  static NodeId sigsq_eps() { return {NodeKind::kSigmaSqEps, 0}; }
  static NodeId a_eps() { return {NodeKind::kAEps, 0}; }
  static NodeId sigsq_mu() { return {NodeKind::kSigmaSqMu, 0}; }
  static NodeId a_mu() { return {NodeKind::kAMu, 0}; }
  static NodeId sigsq_psi(int l) { return {NodeKind::kSigmaSqPsi, l}; }
  static NodeId a_psi(int l) { return {NodeKind::kAPsi, l}; }

  auto operator<=>(const NodeId&) const = default;
};

enum class FactorKind {
  kLikelihood,     // p(y | nu, zeta_1..n, sigsq_eps)
  kPenalization,   // p(nu | sigsq_mu, sigsq_psi_1..L)
  kZetaPrior,      // p(zeta_i)
  kIterEps,        // p(sigsq_eps | a_eps)
  kPriorAEps,      // p(a_eps)
  kIterMu,         // p(sigsq_mu | a_mu)
  kPriorAMu,       // p(a_mu)
  kIterPsi,        // p(sigsq_psi_l | a_psi_l)
  kPriorAPsi,      // p(a_psi_l)
};

struct FactorId {
  FactorKind kind = FactorKind::kLikelihood;
  int index = 0;

  static FactorId likelihood() { return {FactorKind::kLikelihood, 0}; }
  static FactorId penalization() { return {FactorKind::kPenalization, 0}; }
  static FactorId zeta_prior(int i) { return {FactorKind::kZetaPrior, i}; }
  static FactorId iter_eps() { return {FactorKind::kIterEps, 0}; }
  static FactorId prior_a_eps() { return {FactorKind::kPriorAEps, 0}; }
  static FactorId iter_mu() { return {FactorKind::kIterMu, 0}; }
  static FactorId prior_a_mu() { return {FactorKind::kPriorAMu, 0}; }
  static FactorId iter_psi(int l) { return {FactorKind::kIterPsi, l}; }
  static FactorId prior_a_psi(int l) { return {FactorKind::kPriorAPsi, l}; }

  auto operator<=>(const FactorId&) const = default;
};

std::string to_string(const NodeId& node);
std::string to_string(const FactorId& factor);

/// Bipartite topology for n curves, L eigenfunctions and K spline columns.
class FactorGraph {
 public:
  FactorGraph(int num_curves, int num_eigen, int num_splines);

  int num_curves() const { return num_curves_; }
  int num_eigen() const { return num_eigen_; }
  int num_splines() const { return num_splines_; }
  // Length of nu: (L + 1)(K + 2).
  Eigen::Index nu_dim() const;

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<FactorId>& factors() const { return factors_; }

  const std::vector<FactorId>& neighbors(const NodeId& node) const;
  const std::vector<NodeId>& neighbors(const FactorId& factor) const;
  bool connected(const FactorId& factor, const NodeId& node) const;

  // Family and dimension every message incident to the node must carry.
  Family family(const NodeId& node) const;
  Eigen::Index dim(const NodeId& node) const;

 private:
  void connect(const FactorId& factor, const NodeId& node);

  int num_curves_;
  int num_eigen_;
  int num_splines_;
  std::vector<NodeId> nodes_;
  std::vector<FactorId> factors_;
  std::map<NodeId, std::vector<FactorId>> node_neighbors_;
  std::map<FactorId, std::vector<NodeId>> factor_neighbors_;
};

enum class Direction { kFactorToNode, kNodeToFactor };

struct EdgeKey {
  FactorId factor;
  NodeId node;
  Direction direction = Direction::kFactorToNode;

  auto operator<=>(const EdgeKey&) const = default;
};

std::string to_string(const EdgeKey& key);

/// Keyed message storage. Reads of missing keys throw
/// UninitializedGraphError; writes are checked against the node's family.
class MessageStore {
 public:
  explicit MessageStore(std::shared_ptr<const FactorGraph> graph) : graph_(std::move(graph)) {}

  const FactorGraph& graph() const { return *graph_; }
  const std::shared_ptr<const FactorGraph>& shared_graph() const { return graph_; }

  void set(const FactorId& factor, const NodeId& node, Direction direction, Message message);
  const Message& get(const FactorId& factor, const NodeId& node, Direction direction) const;
  bool contains(const FactorId& factor, const NodeId& node, Direction direction) const;

  void set_to_node(const FactorId& factor, const NodeId& node, Message message) {
    set(factor, node, Direction::kFactorToNode, std::move(message));
  }
  const Message& to_node(const FactorId& factor, const NodeId& node) const {
    return get(factor, node, Direction::kFactorToNode);
  }
  const Message& to_factor(const FactorId& factor, const NodeId& node) const {
    return get(factor, node, Direction::kNodeToFactor);
  }

  const std::map<EdgeKey, Message>& entries() const { return messages_; }
  bool operator==(const MessageStore& other) const { return messages_ == other.messages_; }

 private:
  std::shared_ptr<const FactorGraph> graph_;
  std::map<EdgeKey, Message> messages_;
};

/// Product of all factor -> node messages except the one from `target`.
Message stochastic_to_factor(const MessageStore& store, const NodeId& node,
                             const FactorId& target);

/// Recomputes and stores every node -> factor message incident to `factor`.
void refresh_node_to_factor(MessageStore& store, const FactorId& factor);

/// Natural parameters of the optimal q-density of `node`.
NaturalParams q_natural_params(const MessageStore& store, const NodeId& node);

/// eta_{f<->theta} = eta_{f->theta} + eta_{theta->f}.
NaturalParams npbf(const MessageStore& store, const FactorId& factor, const NodeId& node);

}  // namespace bfpca
