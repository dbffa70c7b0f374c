#include "bfpca/dataset.hpp"

#include "bfpca/errors.hpp"

namespace bfpca {

std::size_t FunctionalDataset::total_observations() const {
  std::size_t total = 0;
  for (const Curve& c : curves) total += static_cast<std::size_t>(c.y.size());
  return total;
}

void FunctionalDataset::validate() const {
  if (curves.empty()) throw ValidationError("dataset has no curves");
  for (const Curve& c : curves) {
    if (c.t.size() == 0) throw ValidationError("curve '" + c.id + "' has no observations");
    if (c.t.size() != c.y.size()) {
      throw ValidationError("curve '" + c.id + "' has " + std::to_string(c.t.size()) + " times and " +
                            std::to_string(c.y.size()) + " responses");
    }
    if (!c.y.allFinite()) throw ValidationError("curve '" + c.id + "' has non-finite responses");
    for (Eigen::Index j = 0; j < c.t.size(); ++j) {
      if (!(c.t(j) >= 0.0 && c.t(j) <= 1.0)) {
        throw ValidationError("curve '" + c.id + "' has time " + std::to_string(c.t(j)) +
                              " outside [0, 1]");
      }
    }
  }
}

}  // namespace bfpca
