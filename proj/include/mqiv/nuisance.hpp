#pragma once

#include <string>
#include <vector>

#include "mqiv/dataset.hpp"
#include "mqiv/learners.hpp"

namespace mqiv {

/// Nuisance values at one covariate point.
///   e_z  = E[Y | Z=z, X]          e_1z = E[Y | A=1, Z=z, X]
///   p_z  = Pr(A=1 | Z=z, X)       pi1  = Pr(Z=1 | X)
///   m_z  = E[Y(1-A) | Z=z, X]     (single-arm comparator only)
struct RawPoint {
  double e0 = 0.0, e1 = 0.0;
  double e10 = 0.0, e11 = 0.0;
  double p0 = 0.5, p1 = 0.5;
  double pi1 = 0.5;
  double m0 = 0.0, m1 = 0.0;

  double pi0() const noexcept { return 1.0 - pi1; }
  double e(int z) const noexcept { return z ? e1 : e0; }
  double e1z(int z) const noexcept { return z ? e11 : e10; }
  double p(int z) const noexcept { return z ? p1 : p0; }
  double pi(int z) const noexcept { return z ? pi1 : 1.0 - pi1; }
};

/// Quantities built from a RawPoint:
///   phi        = e11 - e10
///   delta_a    = p1 - p0 (floored away from zero)
///   delta_star = (e1 - e0 - phi) / delta_a
///   rho        = p1 pi1 + p0 pi0
///   w          = e1 pi1 + e0 pi0 - rho delta_star - pi1 phi
struct DerivedPoint {
  double phi = 0.0;
  double delta_a = 0.0;
  double delta_star = 0.0;
  double rho = 0.0;
  double w = 0.0;
  bool floored = false;
};

inline constexpr double kDenominatorFloor = 0.01;

DerivedPoint derive_point(const RawPoint& r, double denom_floor = kDenominatorFloor);

struct ClipCounts {
  std::size_t p0 = 0, p1 = 0, pi1 = 0;
};

/// Out-of-fold nuisance predictions, one entry per observation. m0/m1 are
/// empty unless the single-arm comparator was requested.
struct RawNuisances {
  std::vector<double> e0, e1, e10, e11, p0, p1, pi1, m0, m1;
  std::vector<int> fold_of;
  int k = 1;
  std::vector<std::string> learner_flags;

  std::size_t size() const noexcept { return e0.size(); }
  bool has_single_arm() const noexcept { return !m0.empty(); }

  RawPoint at(std::size_t i) const;
  void resize(std::size_t n, bool single_arm);
  void set(std::size_t i, const RawPoint& r);

  /// Values sitting on a probability clip bound.
  ClipCounts clip_counts(double lo = 0.01, double hi = 0.99) const;

  /// Evaluates `fn` at every row of `ds` (all in a single fold).
  template <class Fn>
  static RawNuisances evaluate(const Dataset& ds, Fn&& fn, bool single_arm = true) {
    RawNuisances out;
    out.resize(ds.n(), single_arm);
    for (std::size_t i = 0; i < ds.n(); ++i) out.set(i, fn(ds.row(i)));
    return out;
  }
};

struct DerivedNuisances {
  std::vector<double> phi, delta_a, delta_star, rho, w;
  std::vector<std::size_t> floored;

  std::size_t size() const noexcept { return phi.size(); }
  DerivedPoint at(std::size_t i) const;
};

DerivedNuisances derive(const RawNuisances& raw, double denom_floor = kDenominatorFloor);

/// One learner per nuisance regression.
struct NuisanceLearners {
  LearnerSpec e0, e1, e10, e11, p0, p1, pi1, m0, m1;

  static NuisanceLearners uniform(const LearnerSpec& spec);
};

/// Cross-fitted nuisances: every prediction for a row in fold k comes from a
/// model trained on the complement of fold k. Throws EmptyCellError naming the
/// cell and fold when a required training cell is empty.
RawNuisances fit_raw_nuisances(const Dataset& ds, const FoldAssignment& folds,
                               const NuisanceLearners& learners, bool need_single_arm);
RawNuisances fit_raw_nuisances(const Dataset& ds, const FoldAssignment& folds,
                               const LearnerSpec& spec, bool need_single_arm);

struct WConsistency {
  double max_discrepancy = 0.0;           ///< over all points
  double max_discrepancy_unfloored = 0.0; ///< over points without flooring
  std::vector<std::size_t> floored;
};

/// Compares w with the equivalent form e0 - p0 delta_star pointwise.
WConsistency w_consistency_check(const RawNuisances& raw, const DerivedNuisances& derived);

}  // namespace mqiv
