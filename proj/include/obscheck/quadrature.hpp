#pragma once

#include <vector>

namespace obscheck {

/// Gauss-Legendre rule mapped onto an interval.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [lo, hi]. Nodes ascend. Requires n >= 1.
QuadratureRule gauss_legendre(int n, double lo, double hi);

}  // namespace obscheck
