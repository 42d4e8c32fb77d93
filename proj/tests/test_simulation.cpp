#include <doctest.h>

#include <array>
#include <cmath>

#include "mqiv/error.hpp"
#include "mqiv/simulation.hpp"
#include "reference_oracle.hpp"

using namespace mqiv;

TEST_SUITE("simulation") {

TEST_CASE("instrument probabilities at the origin") {
  const double c = 1.0 - std::exp(-1.0);
  const auto o = oracle_nuisances(0.0, 0.0, ErMode::violated);
  CHECK(o.p0 == doctest::Approx(c * std::exp(-0.5)).epsilon(1e-12));
  CHECK(o.p0 == doctest::Approx(0.38340).epsilon(1e-5));
  CHECK(o.p1 == doctest::Approx(0.63212).epsilon(1e-5));
  CHECK(o.pi1 == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
}

TEST_CASE("p1 is constant in x") {
  const double c = 1.0 - std::exp(-1.0);
  for (double x1 : {0.0, 0.4, 1.0})
    for (double x2 : {0.0, 0.7, 1.0}) CHECK(oracle_nuisances(x1, x2, ErMode::violated).p1 == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("treated-arm instrument contrast equals the direct effect") {
  for (double x1 : {0.0, 0.25, 0.6, 1.0})
    for (double x2 : {0.0, 0.33, 0.9, 1.0}) {
      const auto v = oracle_nuisances(x1, x2, ErMode::violated);
      const double bz = x1 + x2 + x1 * x2;
      CHECK(std::abs((v.e11 - v.e10) - bz) <= 1e-12 * std::max(1.0, bz));
      const auto s = oracle_nuisances(x1, x2, ErMode::satisfied);
      CHECK(std::abs(s.e11 - s.e10) <= 1e-12);
    }
}

TEST_CASE("conditional effect at the origin") {
  CHECK(treated_u_mean() == doctest::Approx((1 - 2 * std::exp(-1.0)) / (1 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(treated_u_second_moment() == doctest::Approx((2 - 5 * std::exp(-1.0)) / (1 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(oracle_conditional_att(0.0, 0.0) == doctest::Approx(0.25406).epsilon(1e-5));
  const auto d = derive_point(oracle_nuisances(0.0, 0.0, ErMode::violated));
  CHECK(d.delta_star == doctest::Approx(0.25406).epsilon(1e-5));
  const auto d2 = derive_point(oracle_nuisances(0.5, 0.7, ErMode::violated));
  CHECK(d2.delta_star == doctest::Approx(0.41802 * 1.2 + 0.25406).epsilon(1e-5));
}

TEST_CASE("oracle ATT by two methods") {
  const double q = oracle_att(OracleMethod::quadrature);
  CHECK(std::abs(q - 0.679) < 0.005);
  CHECK(q == doctest::Approx(ref::att()).epsilon(1e-6));
  const double mc = oracle_att(OracleMethod::monte_carlo, 1000000);
  CHECK(std::abs(mc - q) < 0.005);
  CHECK_THROWS_AS(oracle_att(OracleMethod::quadrature, 10), ArgumentError);
  CHECK_THROWS_AS(oracle_att(OracleMethod::monte_carlo, 1000), ArgumentError);
}

TEST_CASE("treated fraction matches the reference") {
  const double ref_frac = ref::simpson([](double x1) {
    return ref::simpson([&](double x2) {
      return ref::simpson([&](double u) {
        return ref::pi1(x1, x2) * ref::pr_treat(1, u, x1, x2) + (1 - ref::pi1(x1, x2)) * ref::pr_treat(0, u, x1, x2);
      }, 0, 1, 60);
    }, 0, 1, 60);
  }, 0, 1, 60);
  CHECK(oracle_treated_fraction() == doctest::Approx(ref_frac).epsilon(1e-7));
}

TEST_CASE("oracle rejects points outside the unit square") {
  CHECK_THROWS_AS(oracle_nuisances(-0.01, 0.5, ErMode::violated), ArgumentError);
  CHECK_THROWS_AS(oracle_nuisances(0.5, 1.01, ErMode::violated), ArgumentError);
  CHECK_THROWS_AS(oracle_nuisances(std::vector<double>{0.5}, ErMode::violated), ArgumentError);
}

TEST_CASE("generation is deterministic per seed") {
  for (auto mech : {Mechanism::direct_multiplicative, Mechanism::and_gate}) {
    const auto a = generate({500, ErMode::violated, mech, 7, false});
    const auto b = generate({500, ErMode::violated, mech, 7, false});
    const auto c = generate({500, ErMode::violated, mech, 8, false});
    CHECK(a.ds.y() == b.ds.y());
    CHECK(a.ds.a() == b.ds.a());
    CHECK(a.ds.z() == b.ds.z());
    CHECK((a.ds.x().array() == b.ds.x().array()).all());
    CHECK(a.ds.y() != c.ds.y());
  }
}

TEST_CASE("exclusion-restriction outcome removes the instrument term exactly") {
  const auto v = generate({2000, ErMode::violated, Mechanism::direct_multiplicative, 31, true});
  const auto s = generate({2000, ErMode::satisfied, Mechanism::direct_multiplicative, 31, true});
  CHECK(v.ds.a() == s.ds.a());
  CHECK(v.ds.z() == s.ds.z());
  for (std::size_t i = 0; i < v.ds.n(); ++i) {
    const double x1 = v.ds.x()(static_cast<Eigen::Index>(i), 0), x2 = v.ds.x()(static_cast<Eigen::Index>(i), 1);
    const double expected = ref::beta_z(x1, x2) * v.ds.z()[i];
    CHECK(std::abs((v.ds.y()[i] - s.ds.y()[i]) - expected) <= 1e-12 * std::max(1.0, std::abs(v.ds.y()[i])));
    CHECK(v.latents->y_violated[i] == v.ds.y()[i]);
    CHECK(s.latents->y_satisfied[i] == s.ds.y()[i]);
  }
}

TEST_CASE("latents are consistent with the observed treatment") {
  const auto s = generate({3000, ErMode::violated, Mechanism::direct_multiplicative, 5, true});
  const auto& l = *s.latents;
  for (std::size_t i = 0; i < s.ds.n(); ++i) {
    const auto ai = s.ds.z()[i] ? l.a_z1[i] : l.a_z0[i];
    CHECK(ai == s.ds.a()[i]);
    // coupled potential treatments under the direct mechanism
    CHECK(l.a_z1[i] >= l.a_z0[i]);
    const double x1 = s.ds.x()(static_cast<Eigen::Index>(i), 0), x2 = s.ds.x()(static_cast<Eigen::Index>(i), 1);
    const double effect = l.mean_y_az[2 + s.ds.z()[i]][i] - l.mean_y_az[s.ds.z()[i]][i];
    CHECK(effect == doctest::Approx(ref::beta_a(l.u[i], x1, x2)).epsilon(1e-12));
  }
  const auto cols = latent_columns(l);
  CHECK(cols.size() == 7);
  CHECK(cols.front().name == "u");
}

TEST_CASE("U is unrelated to Z among the treated") {
  const auto s = generate({500000, ErMode::violated, Mechanism::direct_multiplicative, 123, true});
  double n = 0, sz = 0, su = 0, szz = 0, szu = 0;
  for (std::size_t i = 0; i < s.ds.n(); ++i) {
    if (!s.ds.a()[i]) continue;
    const double z = s.ds.z()[i], u = s.latents->u[i];
    n += 1;
    sz += z;
    su += u;
    szz += z * z;
    szu += z * u;
  }
  const double sxx = szz - sz * sz / n;
  const double slope = (szu - sz * su / n) / sxx;
  const double intercept = (su - slope * sz) / n;
  double rss = 0;
  for (std::size_t i = 0; i < s.ds.n(); ++i) {
    if (!s.ds.a()[i]) continue;
    const double r = s.latents->u[i] - intercept - slope * s.ds.z()[i];
    rss += r * r;
  }
  const double se = std::sqrt(rss / (n - 2) / sxx);
  CHECK(std::abs(slope) <= 3.0 * se);
  CHECK(intercept == doctest::Approx(treated_u_mean()).epsilon(0.01));
}

TEST_CASE("and-gate and direct mechanisms give the same treatment cells") {
  const std::size_t n = 500000;
  const auto d = generate({n, ErMode::violated, Mechanism::direct_multiplicative, 99, true});
  const auto g = generate({n, ErMode::violated, Mechanism::and_gate, 99, true});
  // 4 U bins x 4 bins of X1+X2 x Z
  auto bin = [](const SimulatedSample& s, std::size_t i) {
    const int ub = std::min(3, static_cast<int>(s.latents->u[i] * 4));
    const double sx = s.ds.x()(static_cast<Eigen::Index>(i), 0) + s.ds.x()(static_cast<Eigen::Index>(i), 1);
    const int xb = std::min(3, static_cast<int>(sx * 2));
    return (ub * 4 + xb) * 2 + s.ds.z()[i];
  };
  std::array<double, 32> nd{}, ad{}, ng{}, ag{};
  for (std::size_t i = 0; i < n; ++i) {
    nd[bin(d, i)] += 1;
    ad[bin(d, i)] += d.ds.a()[i];
    ng[bin(g, i)] += 1;
    ag[bin(g, i)] += g.ds.a()[i];
  }
  int outside = 0;
  for (int c = 0; c < 32; ++c) {
    REQUIRE(nd[c] > 100);
    REQUIRE(ng[c] > 100);
    const double pd = ad[c] / nd[c], pg = ag[c] / ng[c];
    const double se = std::sqrt(pd * (1 - pd) / nd[c] + pg * (1 - pg) / ng[c]);
    if (std::abs(pd - pg) > 3.0 * se) ++outside;
    CHECK(std::abs(pd - pg) <= 4.5 * se);
  }
  CHECK(outside <= 2);
}

TEST_CASE("mode and mechanism names round-trip") {
  CHECK(parse_er_mode("satisfied") == ErMode::satisfied);
  CHECK(parse_mechanism("and-gate") == Mechanism::and_gate);
  CHECK(parse_mechanism("and_gate") == Mechanism::and_gate);
  CHECK(parse_mechanism("direct") == Mechanism::direct_multiplicative);
  CHECK(to_string(Mechanism::and_gate) == "and-gate");
  CHECK_THROWS_AS(parse_er_mode("maybe"), ArgumentError);
  CHECK_THROWS_AS(parse_mechanism("or-gate"), ArgumentError);
}

TEST_CASE("treatment probability stays inside the unit interval") {
  for (int z = 0; z < 2; ++z)
    for (double u : {0.0, 1e-9, 0.5, 1.0})
      for (double s : {0.0, 1.0, 2.0}) {
        const double p = dgp::treatment_probability(z, u, s / 2, s / 2);
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
        CHECK(p == doctest::Approx(ref::pr_treat(z, u, s / 2, s / 2)).epsilon(1e-14));
      }
}

}  // TEST_SUITE
