#pragma once

#include <vector>

namespace mqiv {

/// Gauss-Legendre nodes and weights mapped to [lo, hi]. Exact for
/// polynomials of degree <= 2n-1.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  GaussLegendre(int n, double lo = -1.0, double hi = 1.0);

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

}  // namespace mqiv
