#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "eccbo/errors.hpp"

namespace eccbo {

/// Axis-aligned box `lower <= x <= upper`.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw ContractViolation("box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i])
        throw ContractViolation("box: empty or non-finite coordinate " + std::to_string(i));
    }
  }

  Eigen::Index dim() const { return lower.size(); }

  bool contains(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    return true;
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) out[i] = std::clamp(x[i], lower[i], upper[i]);
    return out;
  }

  Eigen::VectorXd center() const { return clamp(0.5 * (lower + upper)); }

  /// Maps unit-cube coordinates into the box; the result is always contained.
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const {
    return clamp(lower + u.cwiseProduct(upper - lower));
  }

  bool operator==(const Box& other) const {
    return lower.size() == other.lower.size() && lower == other.lower && upper == other.upper;
  }
};

}  // namespace eccbo
