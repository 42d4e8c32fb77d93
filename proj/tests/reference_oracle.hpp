#pragma once

// Brute-force reference values for the simulation design, built straight
// from the structural equations with composite Simpson rules. Shares no code
// with the library's closed forms or Gauss-Legendre oracle.

#include <cmath>
#include <functional>

namespace ref {

template <class F>
double simpson(F&& f, double a, double b, int m) {
  if (m % 2) ++m;
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline double pi1(double x1, double x2) { return 1.0 / (1.0 + std::exp(1.0 - x1 - x2)); }

inline double pr_treat(int z, double u, double x1, double x2) {
  const double s = x1 + x2;
  return std::exp(z * (s / 2 + 0.5) - s / 2 - u - 0.5);
}

inline double beta_a(double u, double x1, double x2) { return u * (x1 + x2) + u * u; }
inline double beta_u(double u, double x1, double x2) { return x1 + x2 * x2 + u; }
inline double beta_z(double x1, double x2) { return x1 + x2 + x1 * x2; }
inline double beta_x(double x1) { return x1; }

struct Point {
  double e0, e1, e10, e11, p0, p1, pi1, m0, m1;
};

/// Nuisances at x; the treated-arm regression uses Bayes' rule over U.
inline Point nuisances(double x1, double x2, bool violated, int m = 400) {
  const double bz = violated ? beta_z(x1, x2) : 0.0;
  const double bx = beta_x(x1);
  Point p{};
  p.pi1 = pi1(x1, x2);
  for (int z = 0; z < 2; ++z) {
    const double pz = simpson([&](double u) { return pr_treat(z, u, x1, x2); }, 0, 1, m);
    const double num = simpson(
        [&](double u) { return (beta_a(u, x1, x2) + beta_u(u, x1, x2)) * pr_treat(z, u, x1, x2); }, 0,
        1, m);
    const double e1z = num / pz + bz * z + bx;
    const double ez = simpson(
        [&](double u) { return beta_a(u, x1, x2) * pr_treat(z, u, x1, x2) + beta_u(u, x1, x2); }, 0, 1,
        m) + bz * z + bx;
    const double mz = simpson(
        [&](double u) { return (beta_u(u, x1, x2) + bz * z + bx) * (1 - pr_treat(z, u, x1, x2)); }, 0,
        1, m);
    (z ? p.p1 : p.p0) = pz;
    (z ? p.e11 : p.e10) = e1z;
    (z ? p.e1 : p.e0) = ez;
    (z ? p.m1 : p.m0) = mz;
  }
  return p;
}

/// E[h(x1, x2, u, z) | A=1] by 3-D Simpson over (X1, X2, U) summed over Z.
inline double treated_expectation(const std::function<double(double, double, double, int)>& h,
                                  int m = 80) {
  double num = 0.0, den = 0.0;
  for (int z = 0; z < 2; ++z) {
    num += simpson([&](double x1) {
      return simpson([&](double x2) {
        const double pz = z ? pi1(x1, x2) : 1 - pi1(x1, x2);
        return simpson([&](double u) { return h(x1, x2, u, z) * pr_treat(z, u, x1, x2) * pz; }, 0, 1, m);
      }, 0, 1, m);
    }, 0, 1, m);
    den += simpson([&](double x1) {
      return simpson([&](double x2) {
        const double pz = z ? pi1(x1, x2) : 1 - pi1(x1, x2);
        return simpson([&](double u) { return pr_treat(z, u, x1, x2) * pz; }, 0, 1, m);
      }, 0, 1, m);
    }, 0, 1, m);
  }
  return num / den;
}

/// E[g(x1, x2) | A=1] with g a function of covariates only.
inline double treated_covariate_mean(const std::function<double(double, double)>& g, int m = 80) {
  return treated_expectation([&](double x1, double x2, double, int) { return g(x1, x2); }, m);
}

inline double att() {
  return treated_expectation([](double x1, double x2, double u, int) { return beta_a(u, x1, x2); });
}

/// Population limit of the standard Wald plug-in among the treated.
inline double wald_limit(bool violated) {
  return treated_covariate_mean([&](double x1, double x2) {
    const auto p = nuisances(x1, x2, violated, 60);
    return (p.e1 - p.e0) / (p.p1 - p.p0);
  }, 40);
}

/// Population limit of the single-arm plug-in among the treated.
inline double single_arm_limit(bool violated) {
  const double mean_y = treated_expectation([&](double x1, double x2, double u, int z) {
    return beta_a(u, x1, x2) + beta_u(u, x1, x2) + (violated ? beta_z(x1, x2) * z : 0.0) + beta_x(x1);
  });
  const double corr = treated_covariate_mean([&](double x1, double x2) {
    const auto p = nuisances(x1, x2, violated, 60);
    return (p.m1 - p.m0) / (p.p1 - p.p0);
  }, 40);
  return mean_y + corr;
}

/// E[p1(X)] - E[p0(X)] over the covariate distribution.
inline double marginal_relevance(int m = 200) {
  return simpson([&](double x1) {
    return simpson([&](double x2) {
      return simpson([&](double u) { return pr_treat(1, u, x1, x2) - pr_treat(0, u, x1, x2); }, 0, 1, 40);
    }, 0, 1, m);
  }, 0, 1, m);
}

}  // namespace ref
