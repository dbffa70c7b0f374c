#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bfpca {

// One irregularly sampled curve: T observation times in [0, 1] and responses.
struct Curve {
  std::string id;
  Eigen::VectorXd t;
  Eigen::VectorXd y;

  bool operator==(const Curve& other) const {
    return id == other.id && t.size() == other.t.size() && y.size() == other.y.size() &&
           t == other.t && y == other.y;
  }
};

struct FunctionalDataset {
  std::vector<Curve> curves;

  std::size_t size() const { return curves.size(); }
  std::size_t total_observations() const;
  // Throws ValidationError for an empty dataset, empty or ragged curves,
  // non-finite values, or times outside [0, 1].
  void validate() const;

  bool operator==(const FunctionalDataset& other) const = default;
};

}  // namespace bfpca
