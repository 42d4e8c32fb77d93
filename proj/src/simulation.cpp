#include "mqiv/simulation.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "mqiv/error.hpp"
#include "mqiv/quadrature.hpp"

namespace mqiv {

std::string_view to_string(ErMode m) { return m == ErMode::violated ? "violated" : "satisfied"; }

std::string_view to_string(Mechanism m) {
  return m == Mechanism::direct_multiplicative ? "direct" : "and-gate";
}

ErMode parse_er_mode(std::string_view text) {
  if (text == "violated") return ErMode::violated;
  if (text == "satisfied") return ErMode::satisfied;
  throw ArgumentError("unknown ER mode '" + std::string(text) + "' (expected violated or satisfied)");
}

Mechanism parse_mechanism(std::string_view text) {
  if (text == "direct" || text == "direct_multiplicative") return Mechanism::direct_multiplicative;
  if (text == "and-gate" || text == "and_gate") return Mechanism::and_gate;
  throw ArgumentError("unknown mechanism '" + std::string(text) + "' (expected direct or and-gate)");
}

namespace dgp {

double pi1(double x1, double x2) {
  const double t = -1.0 + x1 + x2;
  return 1.0 / (1.0 + std::exp(-t));
}

double alpha1(int z, double x1, double x2) { return z * (x1 / 2 + x2 / 2 + 0.5); }

double alpha2(double u, double x1, double x2) { return -x1 / 2 - x2 / 2 - u - 0.5; }

double treatment_probability(int z, double u, double x1, double x2) {
  return std::exp(alpha1(z, x1, x2) + alpha2(u, x1, x2));
}

double beta_a(double u, double x1, double x2) { return u * x1 + u * x2 + u * u; }

double beta_u(double u, double x1, double x2) { return x1 + x2 * x2 + u; }

double beta_z(double x1, double x2) { return x1 + x2 + x1 * x2; }

double beta_x(double x1) { return x1; }

}  // namespace dgp

SimulatedSample generate(const DgpConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("simulation needs n >= 1");
  const auto n = cfg.n;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, dgp::kNoiseSd);

  std::vector<double> y(n);
  std::vector<std::uint8_t> a(n), z(n);
  RowMatrix x(static_cast<Eigen::Index>(n), 2);
  Latents lat;
  if (cfg.keep_latents) {
    lat.u.resize(n);
    lat.a_z0.resize(n);
    lat.a_z1.resize(n);
    for (auto& v : lat.mean_y_az) v.resize(n);
    lat.y_violated.resize(n);
    lat.y_satisfied.resize(n);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = unif(rng);
    const double x2 = unif(rng);
    const double u = unif(rng);
    const int zi = unif(rng) < dgp::pi1(x1, x2) ? 1 : 0;

    std::uint8_t pot[2];
    if (cfg.mechanism == Mechanism::direct_multiplicative) {
      const double v = unif(rng);
      for (int zz = 0; zz < 2; ++zz) {
        const double pr = dgp::treatment_probability(zz, u, x1, x2);
        if (!(pr > 0.0 && pr < 1.0)) throw std::logic_error("treatment probability outside (0,1)");
        pot[zz] = v < pr ? 1 : 0;
      }
    } else {
      const double g_u = std::exp(dgp::alpha2(u, x1, x2));
      for (int zz = 0; zz < 2; ++zz) {
        const double eps = unif(rng);
        const double index = std::exp(dgp::alpha1(zz, x1, x2)) * g_u;
        if (!(index > 0.0 && index < 1.0)) throw std::logic_error("latent index outside (0,1)");
        pot[zz] = index >= eps ? 1 : 0;
      }
    }
    const int ai = pot[zi];

    const double ba = dgp::beta_a(u, x1, x2);
    const double bu = dgp::beta_u(u, x1, x2);
    const double bz = dgp::beta_z(x1, x2);
    const double bx = dgp::beta_x(x1);
    const double y_full = ba * ai + bu + bz * zi + bx + noise(rng);
    const double y_er = y_full - bz * zi;

    y[i] = cfg.er_mode == ErMode::violated ? y_full : y_er;
    a[i] = static_cast<std::uint8_t>(ai);
    z[i] = static_cast<std::uint8_t>(zi);
    x(static_cast<Eigen::Index>(i), 0) = x1;
    x(static_cast<Eigen::Index>(i), 1) = x2;

    if (cfg.keep_latents) {
      lat.u[i] = u;
      lat.a_z0[i] = pot[0];
      lat.a_z1[i] = pot[1];
      const double direct = cfg.er_mode == ErMode::violated ? bz : 0.0;
      for (int aa = 0; aa < 2; ++aa)
        for (int zz = 0; zz < 2; ++zz)
          lat.mean_y_az[static_cast<std::size_t>(2 * aa + zz)][i] = ba * aa + bu + direct * zz + bx;
      lat.y_violated[i] = y_full;
      lat.y_satisfied[i] = y_er;
    }
  }

  SimulatedSample out{Dataset(std::move(y), std::move(a), std::move(z), std::move(x), {"x1", "x2"}),
                      std::nullopt};
  if (cfg.keep_latents) out.latents = std::move(lat);
  return out;
}

std::vector<ExtraColumn> latent_columns(const Latents& latents) {
  std::vector<ExtraColumn> cols;
  cols.push_back({"u", latents.u});
  cols.push_back({"a_z0", {latents.a_z0.begin(), latents.a_z0.end()}});
  cols.push_back({"a_z1", {latents.a_z1.begin(), latents.a_z1.end()}});
  const char* names[4] = {"mean_y_a0z0", "mean_y_a0z1", "mean_y_a1z0", "mean_y_a1z1"};
  for (std::size_t k = 0; k < 4; ++k) cols.push_back({names[k], latents.mean_y_az[k]});
  return cols;
}

namespace {

const GaussLegendre& unit_rule() {
  static const GaussLegendre rule(64, 0.0, 1.0);
  return rule;
}

const double kTreatedU = 1.0 - std::exp(-1.0);  // E[exp(-U)]

}  // namespace

double treated_u_mean() { return (1.0 - 2.0 * std::exp(-1.0)) / kTreatedU; }

double treated_u_second_moment() { return (2.0 - 5.0 * std::exp(-1.0)) / kTreatedU; }

RawPoint oracle_nuisances(double x1, double x2, ErMode er) {
  if (!(x1 >= 0.0 && x1 <= 1.0 && x2 >= 0.0 && x2 <= 1.0))
    throw ArgumentError("oracle nuisances are defined on [0,1]^2");
  const auto& rule = unit_rule();
  const double s = x1 + x2;
  const double bz = er == ErMode::violated ? dgp::beta_z(x1, x2) : 0.0;
  const double bx = dgp::beta_x(x1);

  RawPoint r;
  r.pi1 = dgp::pi1(x1, x2);
  r.p0 = kTreatedU * std::exp(dgp::alpha1(0, x1, x2) - s / 2 - 0.5);
  r.p1 = kTreatedU * std::exp(dgp::alpha1(1, x1, x2) - s / 2 - 0.5);

  // E[beta_A + beta_U | A=1, X] does not depend on Z.
  const double treated_base = treated_u_mean() * s + treated_u_second_moment() +
                              (x1 + x2 * x2 + treated_u_mean()) + bx;
  r.e10 = treated_base;
  r.e11 = treated_base + bz;

  for (int z = 0; z < 2; ++z) {
    const double e = rule.integrate([&](double u) {
      return dgp::beta_a(u, x1, x2) * dgp::treatment_probability(z, u, x1, x2) +
             dgp::beta_u(u, x1, x2);
    });
    const double m = rule.integrate([&](double u) {
      return (dgp::beta_u(u, x1, x2) + bz * z + bx) *
             (1.0 - dgp::treatment_probability(z, u, x1, x2));
    });
    (z ? r.e1 : r.e0) = e + bz * z + bx;
    (z ? r.m1 : r.m0) = m;
  }
  return r;
}

RawPoint oracle_nuisances(std::span<const double> x, ErMode er) {
  if (x.size() != 2) throw ArgumentError("oracle nuisances expect two covariates");
  return oracle_nuisances(x[0], x[1], er);
}

RawNuisances oracle_raw_nuisances(const Dataset& ds, ErMode er, const FoldAssignment* folds,
                                  bool single_arm) {
  auto raw = RawNuisances::evaluate(
      ds, [er](std::span<const double> x) { return oracle_nuisances(x, er); }, single_arm);
  if (folds) {
    raw.fold_of = folds->fold_of;
    raw.k = folds->k;
  }
  return raw;
}

NuisanceLearners oracle_learners(ErMode er) {
  auto make = [er](double RawPoint::*field, const char* name) {
    return LearnerSpec::oracle(
        [er, field](std::span<const double> x) { return oracle_nuisances(x, er).*field; }, name);
  };
  return {make(&RawPoint::e0, "e0"),   make(&RawPoint::e1, "e1"),   make(&RawPoint::e10, "e10"),
          make(&RawPoint::e11, "e11"), make(&RawPoint::p0, "p0"),   make(&RawPoint::p1, "p1"),
          make(&RawPoint::pi1, "pi1"), make(&RawPoint::m0, "m0"),   make(&RawPoint::m1, "m1")};
}

double oracle_conditional_att(double x1, double x2) {
  return treated_u_mean() * (x1 + x2) + treated_u_second_moment();
}

namespace {

template <class F>
double integrate_square(F&& f) {
  const auto& rule = unit_rule();
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      s += rule.weights[i] * rule.weights[j] * f(rule.nodes[i], rule.nodes[j]);
  return s;
}

double treated_density(double x1, double x2) {
  const double pi = dgp::pi1(x1, x2);
  const double s = x1 + x2;
  const double p0 = kTreatedU * std::exp(-s / 2 - 0.5);
  return pi * kTreatedU + (1.0 - pi) * p0;
}

}  // namespace

double oracle_treated_fraction() { return integrate_square(treated_density); }

double oracle_direct_effect_treated(ErMode er) {
  if (er == ErMode::satisfied) return 0.0;
  const double num = integrate_square([](double x1, double x2) {
    return dgp::beta_z(x1, x2) * treated_density(x1, x2);
  });
  return num / oracle_treated_fraction();
}

double oracle_att(OracleMethod method, std::size_t size, std::uint64_t seed) {
  if (method == OracleMethod::quadrature) {
    if (size != 0) throw ArgumentError("quadrature oracle takes no sample size");
    const double mass = oracle_treated_fraction();
    const double s_mass = integrate_square([](double x1, double x2) {
      return (x1 + x2) * treated_density(x1, x2);
    });
    return treated_u_mean() * (s_mass / mass) + treated_u_second_moment();
  }
  if (size < 1'000'000) throw ArgumentError("Monte Carlo oracle needs at least 1e6 draws");
  const auto sample = generate({size, ErMode::violated, Mechanism::direct_multiplicative, seed, true});
  const auto& lat = *sample.latents;
  double sum = 0.0;
  std::size_t treated = 0;
  for (std::size_t i = 0; i < size; ++i) {
    if (!sample.ds.a()[i]) continue;
    const auto z = static_cast<std::size_t>(sample.ds.z()[i]);
    sum += lat.mean_y_az[2 + z][i] - lat.mean_y_az[z][i];
    ++treated;
  }
  return sum / static_cast<double>(treated);
}

}  // namespace mqiv
