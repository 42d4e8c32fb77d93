#include "mqiv/estimators.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "mqiv/error.hpp"

namespace mqiv {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

ConfidenceInterval confidence_interval(double point, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must be in (0, 1)");
  if (!(se >= 0.0)) throw ArgumentError("standard error must be non-negative");
  const double half = normal_quantile(1.0 - (1.0 - level) / 2.0) * se;
  return {point - half, point + half};
}

namespace {

void require_finite(const RawPoint& r, const DerivedPoint& d) {
  for (double v : {r.e0, r.e1, r.e10, r.e11, r.p0, r.p1, r.pi1, d.phi, d.delta_a, d.delta_star,
                   d.rho, d.w})
    if (!std::isfinite(v)) throw ArgumentError("non-finite nuisance value");
}

double scale_factor(const Observation& obs, const RawPoint& raw, const DerivedPoint& d) {
  return d.rho / d.delta_a * (2.0 * obs.z - 1.0) / raw.pi(obs.z);
}

double treated_correction(const Observation& obs, const RawPoint& raw, const DerivedPoint& d) {
  return obs.a / raw.p(obs.z) * (obs.y - obs.z * d.phi - raw.e10);
}

}  // namespace

double theta(const Observation& obs, const RawPoint& raw, const DerivedPoint& d) {
  require_finite(raw, d);
  const double resid = obs.y - obs.a * d.delta_star - obs.z * d.phi - d.w;
  return scale_factor(obs, raw, d) * (resid - treated_correction(obs, raw, d));
}

double theta_alternative(const Observation& obs, const RawPoint& raw, const DerivedPoint& d) {
  require_finite(raw, d);
  const double resid = obs.y - raw.e(obs.z) - (obs.a - raw.p(obs.z)) * d.delta_star;
  return scale_factor(obs, raw, d) * (resid - treated_correction(obs, raw, d));
}

double eif_contribution(const Observation& obs, const RawPoint& raw, const DerivedPoint& d,
                        double delta_star_marginal, double pr_a) {
  if (!(pr_a > 0.0 && pr_a < 1.0)) throw ArgumentError("Pr(A=1) must be in (0, 1)");
  if (!std::isfinite(delta_star_marginal)) throw ArgumentError("non-finite marginal effect");
  return (obs.a * (d.delta_star - delta_star_marginal) + theta(obs, raw, d)) / pr_a;
}

namespace {

Diagnostics diagnostics_of(const RawNuisances& raw, std::size_t floored) {
  return {floored, raw.clip_counts(), raw.learner_flags};
}

void require_rows(const Dataset& ds, const RawNuisances& raw) {
  if (raw.size() != ds.n()) throw ArgumentError("nuisance count does not match dataset rows");
  if (ds.n_treated() == 0) throw EstimationError("no treated units");
}

template <class F>
double treated_mean(const Dataset& ds, F&& value) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.a()[i]) {
      sum += value(i);
      ++count;
    }
  return sum / static_cast<double>(count);
}

}  // namespace

EstimateResult estimate_plugin_mqiv(const Dataset& ds, const RawNuisances& raw,
                                    const DerivedNuisances& derived) {
  require_rows(ds, raw);
  if (derived.size() != ds.n()) throw ArgumentError("derived nuisance count does not match dataset");
  EstimateResult r;
  r.estimator = "w1";
  r.point = treated_mean(ds, [&](std::size_t i) { return derived.delta_star[i]; });
  r.diagnostics = diagnostics_of(raw, derived.floored.size());
  return r;
}

EstimateResult estimate_eif_mqiv(const Dataset& ds, const FoldAssignment& folds,
                                 const RawNuisances& raw, const DerivedNuisances& derived,
                                 double level) {
  require_rows(ds, raw);
  if (derived.size() != ds.n()) throw ArgumentError("derived nuisance count does not match dataset");
  if (folds.fold_of.size() != ds.n()) throw ArgumentError("fold assignment does not match dataset");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must be in (0, 1)");

  const double pr_a = ds.treated_fraction();
  const auto k = static_cast<std::size_t>(folds.k);
  std::vector<double> gamma(ds.n());
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto obs = observation(ds, i);
    gamma[i] = obs.a * derived.delta_star[i] + theta(obs, raw.at(i), derived.at(i));
    const auto f = static_cast<std::size_t>(folds.fold_of[i]);
    sums[f] += gamma[i];
    ++sizes[f];
  }

  EstimateResult r;
  r.estimator = "if1";
  r.level = level;
  for (std::size_t f = 0; f < k; ++f) {
    if (sizes[f] == 0) throw EstimationError("fold " + std::to_string(f) + " has no observations");
    r.fold_estimates.push_back(sums[f] / static_cast<double>(sizes[f]) / pr_a);
  }
  r.point = 0.0;
  for (double v : r.fold_estimates) r.point += v;
  r.point /= static_cast<double>(k);

  std::vector<double> sq(k, 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double e = (gamma[i] - ds.a()[i] * r.point) / pr_a;
    sq[static_cast<std::size_t>(folds.fold_of[i])] += e * e;
  }
  double sigma2 = 0.0;
  for (std::size_t f = 0; f < k; ++f) sigma2 += sq[f] / static_cast<double>(sizes[f]);
  sigma2 /= static_cast<double>(k);

  r.se = std::sqrt(sigma2 / static_cast<double>(ds.n()));
  r.ci = confidence_interval(r.point, *r.se, level);
  r.diagnostics = diagnostics_of(raw, derived.floored.size());
  return r;
}

EstimateResult estimate_plugin_wald(const Dataset& ds, const RawNuisances& raw) {
  require_rows(ds, raw);
  std::size_t floored = 0;
  EstimateResult r;
  r.estimator = "w2";
  r.point = treated_mean(ds, [&](std::size_t i) {
    const auto d = derive_point(raw.at(i));
    floored += d.floored;
    return (raw.e1[i] - raw.e0[i]) / d.delta_a;
  });
  r.diagnostics = diagnostics_of(raw, floored);
  return r;
}

EstimateResult estimate_plugin_single_arm(const Dataset& ds, const RawNuisances& raw) {
  require_rows(ds, raw);
  if (!raw.has_single_arm())
    throw EstimationError("single-arm estimator needs the m0/m1 nuisances");
  std::size_t floored = 0;
  EstimateResult r;
  r.estimator = "w3";
  r.point = treated_mean(ds, [&](std::size_t i) {
    const auto d = derive_point(raw.at(i));
    floored += d.floored;
    return ds.y()[i] + (raw.m1[i] - raw.m0[i]) / d.delta_a;
  });
  r.diagnostics = diagnostics_of(raw, floored);
  return r;
}

EstimateResult estimate_direct_effect_treated(const Dataset& ds, const RawNuisances& raw) {
  require_rows(ds, raw);
  EstimateResult r;
  r.estimator = "phi";
  r.point = treated_mean(ds, [&](std::size_t i) { return raw.e11[i] - raw.e10[i]; });
  r.diagnostics = diagnostics_of(raw, 0);
  return r;
}

}  // namespace mqiv
