#include "mqiv/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "mqiv/error.hpp"

namespace mqiv {

// Newton iteration on P_n from the Tricomi initial guess; the recurrence
// gives P_n and P_{n-1}, hence P'_n.
GaussLegendre::GaussLegendre(int n, double lo, double hi) {
  if (n < 1) throw ArgumentError("Gauss-Legendre rule needs at least one node");
  if (!(hi > lo)) throw ArgumentError("Gauss-Legendre interval must have hi > lo");
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo_i = static_cast<std::size_t>(i);
    const auto hi_i = static_cast<std::size_t>(n - 1 - i);
    nodes[lo_i] = mid - half * x;
    nodes[hi_i] = mid + half * x;
    weights[lo_i] = half * w;
    weights[hi_i] = half * w;
  }
}

}  // namespace mqiv
