#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mqiv/dataset.hpp"
#include "mqiv/nuisance.hpp"

namespace mqiv {

struct Observation {
  double y = 0.0;
  int a = 0;
  int z = 0;
};

inline Observation observation(const Dataset& ds, std::size_t i) {
  return {ds.y()[i], ds.a()[i], ds.z()[i]};
}

struct Diagnostics {
  std::size_t floored_count = 0;
  ClipCounts clip_counts;
  std::vector<std::string> learner_flags;
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

/// Point estimate with optional analytic standard error. Plug-in estimators
/// leave `se` and `ci` empty.
struct EstimateResult {
  std::string estimator;
  double point = 0.0;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
  double level = 0.95;
  std::vector<double> fold_estimates;
  Diagnostics diagnostics;
};

/// Standard normal quantile.
double normal_quantile(double p);

/// point -/+ z_{1-(1-level)/2} * se.
ConfidenceInterval confidence_interval(double point, double se, double level);

/// Influence-function correction term
///   theta(O) = rho/(p1-p0) * (2Z-1)/pi_Z *
///              { Y - A d*(X) - Z phi - w - (A/p_Z) [Y - Z phi - e10] }.
/// The denominator p1-p0 is taken from derived.delta_a (floored).
double theta(const Observation& obs, const RawPoint& raw, const DerivedPoint& derived);

/// Equivalent form of theta in which {Y - e_Z - (A - p_Z) d*(X) - (A/p_Z)[Y - Z phi - e10]}
/// replaces the bracket. Agrees with theta() whenever e1 - e0 = (p1-p0) d* + phi and
/// w = e0 - p0 d*.
double theta_alternative(const Observation& obs, const RawPoint& raw, const DerivedPoint& derived);

/// (1/pr_a) { A (d*(X) - delta_star_marginal) + theta(O) }.
double eif_contribution(const Observation& obs, const RawPoint& raw, const DerivedPoint& derived,
                        double delta_star_marginal, double pr_a);

/// W1: sum_i A_i d*_i / sum_i A_i.
EstimateResult estimate_plugin_mqiv(const Dataset& ds, const RawNuisances& raw,
                                    const DerivedNuisances& derived);

/// IF1: cross-fitted one-step estimator averaged over folds, with the
/// fold-averaged variance estimate and a Wald interval.
EstimateResult estimate_eif_mqiv(const Dataset& ds, const FoldAssignment& folds,
                                 const RawNuisances& raw, const DerivedNuisances& derived,
                                 double level = 0.95);

/// W2: standard Wald ratio (e1 - e0)/(p1 - p0) averaged over the treated.
EstimateResult estimate_plugin_wald(const Dataset& ds, const RawNuisances& raw);

/// W3: single-arm ratio Y + (m1 - m0)/(p1 - p0) averaged over the treated.
EstimateResult estimate_plugin_single_arm(const Dataset& ds, const RawNuisances& raw);

/// Plug-in average of phi(X) = e11 - e10 over the treated.
EstimateResult estimate_direct_effect_treated(const Dataset& ds, const RawNuisances& raw);

enum class EstimatorKind { w1, if1, w2, w3, phi };

std::string_view to_string(EstimatorKind kind);
/// Case-insensitive: w1, if1, w2, w3, phi.
EstimatorKind parse_estimator(std::string_view text);
/// Comma-separated list; duplicates removed, order kept.
std::vector<EstimatorKind> parse_estimator_list(std::string_view text);
bool needs_single_arm(std::span<const EstimatorKind> kinds);

EstimateResult run_estimator(EstimatorKind kind, const Dataset& ds, const FoldAssignment& folds,
                             const RawNuisances& raw, const DerivedNuisances& derived,
                             double level = 0.95);

enum class Perturbation { m1, m2, m3, all_wrong };

std::string_view to_string(Perturbation p);
Perturbation parse_perturbation(std::string_view text);

/// Which nuisance block is held at truth, and how far the rest is moved.
struct PerturbationMode {
  Perturbation which = Perturbation::m1;
  double shift = 0.3;
};

struct ProbeResult {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;

  /// |mean| <= multiple * se
  bool within(double multiple) const { return std::abs(mean) <= multiple * se; }
};

/// Perturbs the true nuisances outside the block that `mode` keeps correct
/// and returns the sample mean of the EIF at the true marginal effect.
///
/// Perturbations, with x1 the first covariate and s the shift:
///   regressions for arm z (e_z, e_1z, m_z):  + s (1 + x1)(1 + z)
///   p_z:   logit + s (1 + x1)(2z - 1)
///   pi1:   logit + s (1 + x1)
///
/// Blocks held at truth:
///   m1  p_z, pi_z           (delta*, phi, w re-derived from perturbed regressions)
///   m2  delta*, e_1z, w     (p_z, pi_z perturbed)
///   m3  delta*, e_1z, pi_z  (p_z and e_z perturbed, w re-derived)
///   all_wrong  nothing
ProbeResult robustness_probe(const Dataset& ds, const RawNuisances& truth, PerturbationMode mode,
                             double delta_star_marginal);

}  // namespace mqiv
