#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mqiv/error.hpp"
#include "mqiv/estimators.hpp"
#include "mqiv/simulation.hpp"
#include "reference_oracle.hpp"

using namespace mqiv;

namespace {

struct OracleDraw {
  SimulatedSample sample;
  FoldAssignment folds;
  RawNuisances raw;
  DerivedNuisances derived;
};

const OracleDraw& oracle_draw(ErMode er) {
  auto make = [](ErMode mode, std::uint64_t seed) {
    OracleDraw d{generate({50000, mode, Mechanism::direct_multiplicative, seed, false}), {}, {}, {}};
    d.folds = split_folds(d.sample.ds.n(), 5, seed);
    d.raw = oracle_raw_nuisances(d.sample.ds, mode, &d.folds);
    d.derived = derive(d.raw);
    return d;
  };
  static const OracleDraw violated = make(ErMode::violated, 501);
  static const OracleDraw satisfied = make(ErMode::satisfied, 502);
  return er == ErMode::violated ? violated : satisfied;
}

double reference_att() {
  static const double v = ref::att();
  return v;
}

Dataset twelve_rows() {
  // (Z, A, Y) with a single covariate value
  const int rows[12][3] = {{0, 1, 3}, {0, 1, 5}, {0, 0, 1}, {0, 0, 2}, {0, 0, 0}, {0, 0, 1},
                           {1, 1, 6}, {1, 1, 7}, {1, 1, 8}, {1, 1, 5}, {1, 0, 2}, {1, 0, 2}};
  std::vector<double> y;
  std::vector<std::uint8_t> a, z;
  for (const auto& r : rows) {
    z.push_back(static_cast<std::uint8_t>(r[0]));
    a.push_back(static_cast<std::uint8_t>(r[1]));
    y.push_back(r[2]);
  }
  return Dataset(std::move(y), std::move(a), std::move(z), RowMatrix::Constant(12, 1, 0.5));
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("EIF contribution matches a hand evaluation") {
  const Observation obs{2.0, 1, 0};
  RawPoint raw;
  raw.p0 = 0.4;
  raw.p1 = 0.6;
  raw.pi1 = 0.5;
  raw.e10 = 1.5;
  DerivedPoint d;
  d.rho = 0.5;
  d.delta_a = 0.2;
  d.phi = 0.3;
  d.delta_star = 1.0;
  d.w = 0.2;
  // rho/delta_a * (2Z-1)/pi_Z * {Y - A d* - Z phi - w - (A/p_Z)(Y - Z phi - e10)}
  const double hand = 0.5 / 0.2 * (-1.0 / 0.5) * ((2.0 - 1.0 - 0.0 - 0.2) - (1.0 / 0.4) * (2.0 - 1.5));
  CHECK(hand == doctest::Approx(2.25));
  CHECK(theta(obs, raw, d) == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(eif_contribution(obs, raw, d, 0.8, 0.5) == doctest::Approx(4.9).epsilon(1e-12));
}

TEST_CASE("EIF contribution vanishes when both residuals vanish") {
  RawPoint raw;
  raw.p0 = 0.3;
  raw.p1 = 0.7;
  raw.pi1 = 0.4;
  raw.e10 = 1.2;
  DerivedPoint d;
  d.rho = 0.5;
  d.delta_a = 0.4;
  d.phi = 0.6;
  d.delta_star = 0.9;
  d.w = 0.35;
  // untreated, Z=0, Y = w
  CHECK(eif_contribution({0.35, 0, 0}, raw, d, 0.9, 0.3) == doctest::Approx(0.0).scale(1.0));
  // treated, Z=1, Y = e11 = e10 + phi, with w = Y - d* - phi
  d.w = (raw.e10 + d.phi) - d.delta_star - d.phi;
  CHECK(std::abs(eif_contribution({raw.e10 + d.phi, 1, 1}, raw, d, 0.9, 0.3)) < 1e-14);
}

TEST_CASE("EIF rejects non-finite input and bad treated fraction") {
  RawPoint raw;
  DerivedPoint d;
  d.delta_a = 0.1;
  d.rho = 0.5;
  CHECK_THROWS_AS(eif_contribution({1, 1, 1}, raw, d, 0.5, 0.0), ArgumentError);
  CHECK_THROWS_AS(eif_contribution({1, 1, 1}, raw, d, std::nan(""), 0.5), ArgumentError);
  d.w = INFINITY;
  CHECK_THROWS_AS(eif_contribution({1, 1, 1}, raw, d, 0.5, 0.5), ArgumentError);
}

TEST_CASE("theta forms agree under consistent nuisances") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 0.9), v(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    RawPoint r;
    r.p0 = u(rng);
    r.p1 = r.p0 + 0.05 + 0.05 * u(rng);
    r.pi1 = u(rng);
    r.e0 = v(rng);
    r.e10 = v(rng);
    r.e11 = v(rng);
    const double ds = v(rng);
    r.e1 = r.e0 + (r.p1 - r.p0) * ds + (r.e11 - r.e10);
    const auto d = derive_point(r);
    const Observation obs{v(rng), static_cast<int>(rng() % 2), static_cast<int>(rng() % 2)};
    CHECK(std::abs(theta(obs, r, d) - theta_alternative(obs, r, d)) <= 1e-12 * std::max(1.0, std::abs(theta(obs, r, d))) * 100);
  }
}

TEST_CASE("theta forms differ when the linkage is broken") {
  RawPoint r;
  r.p0 = 0.3;
  r.p1 = 0.6;
  r.pi1 = 0.5;
  r.e0 = 1.0;
  r.e1 = 2.0;
  r.e10 = 0.5;
  r.e11 = 0.8;
  auto d = derive_point(r);
  const Observation obs{1.7, 0, 1};
  CHECK(std::abs(theta(obs, r, d) - theta_alternative(obs, r, d)) < 1e-12);
  r.e1 += 0.25;  // derived no longer matches raw
  CHECK(std::abs(theta(obs, r, d) - theta_alternative(obs, r, d)) > 1e-3);
}

TEST_CASE("theta forms agree on oracle nuisances") {
  const auto& o = oracle_draw(ErMode::violated);
  double worst = 0.0;
  for (std::size_t i = 0; i < 10000; ++i) {
    const auto obs = observation(o.sample.ds, i);
    worst = std::max(worst, std::abs(theta(obs, o.raw.at(i), o.derived.at(i)) -
                                     theta_alternative(obs, o.raw.at(i), o.derived.at(i))));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("W1 with constant delta star returns the constant") {
  const auto& o = oracle_draw(ErMode::violated);
  auto derived = o.derived;
  std::fill(derived.delta_star.begin(), derived.delta_star.end(), 1.234);
  CHECK(estimate_plugin_mqiv(o.sample.ds, o.raw, derived).point == doctest::Approx(1.234).epsilon(1e-12));
}

TEST_CASE("W1 on a twelve-row dataset matches hand cell means") {
  const auto ds = twelve_rows();
  double s[2] = {0, 0}, n[2] = {0, 0}, t[2] = {0, 0}, ty[2] = {0, 0};
  for (std::size_t i = 0; i < 12; ++i) {
    const int zi = ds.z()[i];
    s[zi] += ds.y()[i];
    n[zi] += 1;
    if (ds.a()[i]) {
      t[zi] += 1;
      ty[zi] += ds.y()[i];
    }
  }
  RawPoint cell;
  cell.e0 = s[0] / n[0];
  cell.e1 = s[1] / n[1];
  cell.e10 = ty[0] / t[0];
  cell.e11 = ty[1] / t[1];
  cell.p0 = t[0] / n[0];
  cell.p1 = t[1] / n[1];
  cell.pi1 = n[1] / 12.0;
  const double hand = (cell.e1 - cell.e0 - (cell.e11 - cell.e10)) / (cell.p1 - cell.p0);
  CHECK(hand == doctest::Approx(1.5));
  const auto raw = RawNuisances::evaluate(ds, [&](std::span<const double>) { return cell; }, false);
  const auto r = estimate_plugin_mqiv(ds, raw, derive(raw));
  CHECK(r.point == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(r.estimator == "w1");
  CHECK_FALSE(r.se.has_value());
  CHECK_FALSE(r.ci.has_value());
}

TEST_CASE("W1 with oracle nuisances recovers the ATT") {
  const auto& o = oracle_draw(ErMode::violated);
  const double point = estimate_plugin_mqiv(o.sample.ds, o.raw, o.derived).point;
  CHECK(std::abs(point - 0.679) < 0.02);
  CHECK(std::abs(reference_att() - 0.679) < 0.005);
}

TEST_CASE("estimators require treated units") {
  std::vector<double> y{1, 2, 3, 4};
  const Dataset ds(y, {0, 0, 0, 0}, {0, 1, 0, 1}, RowMatrix::Constant(4, 1, 0.5));
  const auto raw = RawNuisances::evaluate(ds, [](std::span<const double>) { return RawPoint{}; });
  const auto derived = derive(raw);
  CHECK_THROWS_AS(estimate_plugin_mqiv(ds, raw, derived), EstimationError);
  CHECK_THROWS_AS(estimate_eif_mqiv(ds, split_folds(4, 2, 1), raw, derived), EstimationError);
  CHECK_THROWS_AS(estimate_plugin_wald(ds, raw), EstimationError);
  CHECK_THROWS_AS(estimate_plugin_single_arm(ds, raw), EstimationError);
  CHECK_THROWS_AS(estimate_direct_effect_treated(ds, raw), EstimationError);
}

TEST_CASE("IF1 with zero correction and constant delta star returns the constant") {
  // p_z = 1, phi = 0, w = 0, e10 = c and untreated Y = 0 make theta vanish
  const std::size_t n = 40;
  std::vector<double> y(n);
  std::vector<std::uint8_t> a(n), z(n);
  std::mt19937_64 rng(2);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<std::uint8_t>(rng() % 2);
    z[i] = static_cast<std::uint8_t>(rng() % 2);
    y[i] = a[i] ? 3.0 + static_cast<double>(i) : 0.0;
  }
  if (std::count(a.begin(), a.end(), 1) == 0) a[0] = 1;
  const Dataset ds(y, a, z, RowMatrix::Constant(static_cast<Eigen::Index>(n), 1, 0.5));
  const double c = 0.8;
  RawPoint rp;
  rp.p0 = rp.p1 = 1.0;
  rp.pi1 = 0.5;
  rp.e10 = c;
  const auto raw = RawNuisances::evaluate(ds, [&](std::span<const double>) { return rp; }, false);
  DerivedNuisances derived;
  derived.phi.assign(n, 0.0);
  derived.delta_a.assign(n, 0.5);
  derived.delta_star.assign(n, c);
  derived.rho.assign(n, 0.5);
  derived.w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) CHECK(theta(observation(ds, i), rp, derived.at(i)) == 0.0);
  const auto r = estimate_eif_mqiv(ds, split_folds(n, 4, 3), raw, derived);
  CHECK(r.point == doctest::Approx(c).epsilon(1e-12));
  REQUIRE(r.se.has_value());
  CHECK(*r.se >= 0.0);
}

TEST_CASE("IF1 point does not depend much on the number of folds") {
  const auto& o = oracle_draw(ErMode::violated);
  const auto f2 = split_folds(o.sample.ds.n(), 2, 77);
  const auto r2 = estimate_eif_mqiv(o.sample.ds, f2, o.raw, o.derived);
  const auto r5 = estimate_eif_mqiv(o.sample.ds, o.folds, o.raw, o.derived);
  CHECK(r2.fold_estimates.size() == 2);
  CHECK(r5.fold_estimates.size() == 5);
  CHECK(std::abs(r2.point - r5.point) < 3.0 * *r5.se);
  CHECK(std::abs(r5.point - reference_att()) < 4.0 * *r5.se);
  CHECK(r5.ci->low < r5.point);
  CHECK(r5.ci->high > r5.point);
  CHECK(r5.estimator == "if1");
}

TEST_CASE("W2 equals W1 when phi is zero") {
  const auto& o = oracle_draw(ErMode::violated);
  auto raw = o.raw;
  raw.e11 = raw.e10;
  const auto w1 = estimate_plugin_mqiv(o.sample.ds, raw, derive(raw));
  const auto w2 = estimate_plugin_wald(o.sample.ds, raw);
  CHECK(w2.point == doctest::Approx(w1.point).epsilon(1e-12));
}

TEST_CASE("W2 bias under a direct instrument effect matches the population limit") {
  const auto& o = oracle_draw(ErMode::violated);
  const double limit = ref::wald_limit(true) - reference_att();
  CHECK(limit == doctest::Approx(3.061).epsilon(0.002));
  const double bias = estimate_plugin_wald(o.sample.ds, o.raw).point - reference_att();
  CHECK(std::abs(bias - limit) < 0.05);
  CHECK(bias >= 3.0);
  CHECK(bias <= 3.45);
}

TEST_CASE("W2 is unbiased when the exclusion restriction holds") {
  const auto& o = oracle_draw(ErMode::satisfied);
  CHECK(std::abs(estimate_plugin_wald(o.sample.ds, o.raw).point - reference_att()) < 0.05);
}

TEST_CASE("W3 with equal untreated regressions is the treated mean") {
  const auto& o = oracle_draw(ErMode::violated);
  auto raw = o.raw;
  raw.m1 = raw.m0;
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < o.sample.ds.n(); ++i)
    if (o.sample.ds.a()[i]) {
      s += o.sample.ds.y()[i];
      n += 1;
    }
  CHECK(estimate_plugin_single_arm(o.sample.ds, raw).point == doctest::Approx(s / n).epsilon(1e-12));
}

TEST_CASE("W3 bias matches the population limit") {
  const auto& o = oracle_draw(ErMode::violated);
  const double limit = ref::single_arm_limit(true) - reference_att();
  const double bias = estimate_plugin_single_arm(o.sample.ds, o.raw).point - reference_att();
  CHECK(std::abs(limit - 2.12) < 0.15);
  CHECK(std::abs(bias - 2.12) < 0.15);
  CHECK(std::abs(bias - limit) < 0.1);
}

TEST_CASE("W3 is unbiased when the exclusion restriction holds") {
  const auto& o = oracle_draw(ErMode::satisfied);
  CHECK(std::abs(estimate_plugin_single_arm(o.sample.ds, o.raw).point - reference_att()) < 0.05);
}

TEST_CASE("W3 needs the untreated regressions") {
  const auto& o = oracle_draw(ErMode::violated);
  auto raw = o.raw;
  raw.m0.clear();
  raw.m1.clear();
  CHECK_THROWS_AS(estimate_plugin_single_arm(o.sample.ds, raw), EstimationError);
}

TEST_CASE("direct effect among the treated") {
  const auto& o = oracle_draw(ErMode::violated);
  const double truth = ref::treated_covariate_mean([](double x1, double x2) { return ref::beta_z(x1, x2); });
  CHECK(oracle_direct_effect_treated(ErMode::violated) == doctest::Approx(truth).epsilon(1e-6));
  CHECK(std::abs(estimate_direct_effect_treated(o.sample.ds, o.raw).point - truth) < 0.02);
  const auto& s = oracle_draw(ErMode::satisfied);
  CHECK(std::abs(estimate_direct_effect_treated(s.sample.ds, s.raw).point) < 0.02);
  auto zero = o.raw;
  zero.e11 = zero.e10;
  CHECK(estimate_direct_effect_treated(o.sample.ds, zero).point == 0.0);
}

TEST_CASE("EIF has mean zero at the true nuisances") {
  const auto& o = oracle_draw(ErMode::violated);
  const double pr_a = o.sample.ds.treated_fraction();
  const double psi = oracle_att(OracleMethod::quadrature);
  double sum = 0.0, sq = 0.0;
  const auto n = o.sample.ds.n();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = eif_contribution(observation(o.sample.ds, i), o.raw.at(i), o.derived.at(i), psi, pr_a);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) <= 4.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("robustness probe separates correct blocks from the negative control") {
  const auto s = generate({100000, ErMode::violated, Mechanism::direct_multiplicative, 4242, false});
  const auto truth = oracle_raw_nuisances(s.ds, ErMode::violated);
  const double psi = oracle_att(OracleMethod::quadrature);
  for (auto p : {Perturbation::m1, Perturbation::m2, Perturbation::m3}) {
    const auto r = robustness_probe(s.ds, truth, {p, 0.3}, psi);
    INFO(to_string(p));
    CHECK(r.n == s.ds.n());
    CHECK(r.within(3.0));
  }
  const auto bad = robustness_probe(s.ds, truth, {Perturbation::all_wrong, 0.3}, psi);
  CHECK_FALSE(bad.within(5.0));
  CHECK_THROWS_AS(robustness_probe(s.ds, truth, {Perturbation::m1, 0.0}, psi), ArgumentError);
  CHECK_THROWS_AS(parse_perturbation("m4"), ArgumentError);
  CHECK(parse_perturbation("all-wrong") == Perturbation::all_wrong);
}

TEST_CASE("normal quantile and confidence intervals") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  auto ci = confidence_interval(0.0, 1.0, 0.95);
  CHECK(std::abs(ci.low + 1.959964) < 1e-5);
  CHECK(std::abs(ci.high - 1.959964) < 1e-5);
  ci = confidence_interval(0.42, 0.0, 0.95);
  CHECK(ci.low == 0.42);
  CHECK(ci.high == 0.42);
  ci = confidence_interval(0.679, 0.1, 0.95);
  CHECK(std::abs(ci.low - 0.483) < 1e-3);
  CHECK(std::abs(ci.high - 0.875) < 1e-3);
  CHECK_THROWS_AS(confidence_interval(0, 1, 1.0), ArgumentError);
  CHECK_THROWS_AS(confidence_interval(0, 1, 0.0), ArgumentError);
  CHECK_THROWS_AS(confidence_interval(0, -1, 0.9), ArgumentError);
  CHECK_THROWS_AS(normal_quantile(1.0), ArgumentError);
}

TEST_CASE("estimator names parse and dispatch") {
  CHECK(parse_estimator(" IF1 ") == EstimatorKind::if1);
  CHECK(parse_estimator("Phi") == EstimatorKind::phi);
  CHECK_THROWS_AS(parse_estimator("if2"), ArgumentError);
  const auto list = parse_estimator_list("w2,w3,phi,w2");
  REQUIRE(list.size() == 3);
  CHECK(list[0] == EstimatorKind::w2);
  CHECK(list[2] == EstimatorKind::phi);
  CHECK(needs_single_arm(list));
  CHECK_FALSE(needs_single_arm(parse_estimator_list("if1,w1")));
  const auto& o = oracle_draw(ErMode::violated);
  for (auto k : {EstimatorKind::w1, EstimatorKind::if1, EstimatorKind::w2, EstimatorKind::w3, EstimatorKind::phi}) {
    const auto r = run_estimator(k, o.sample.ds, o.folds, o.raw, o.derived);
    CHECK(r.estimator == to_string(k));
    CHECK(r.se.has_value() == (k == EstimatorKind::if1));
  }
}

}  // TEST_SUITE
