#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mqiv/dataset.hpp"
#include "mqiv/nuisance.hpp"

namespace mqiv {

/// Whether the instrument has a direct effect on the outcome.
enum class ErMode { violated, satisfied };
/// direct_multiplicative draws A ~ Bernoulli(exp(a1 + a2)) from one uniform;
/// and_gate draws potential treatments A^z = 1{exp(a1(z)) g_U >= eps_z} with
/// independent thresholds eps_0, eps_1 ~ U(0,1). Both give the same
/// Pr(A=1 | Z, X, U).
enum class Mechanism { direct_multiplicative, and_gate };

std::string_view to_string(ErMode m);
std::string_view to_string(Mechanism m);
ErMode parse_er_mode(std::string_view text);
Mechanism parse_mechanism(std::string_view text);

/// Structural pieces of the simulation design with two uniform covariates and
/// a uniform hidden confounder U.
namespace dgp {
double pi1(double x1, double x2);
double alpha1(int z, double x1, double x2);
double alpha2(double u, double x1, double x2);
double treatment_probability(int z, double u, double x1, double x2);
double beta_a(double u, double x1, double x2);
double beta_u(double u, double x1, double x2);
double beta_z(double x1, double x2);
double beta_x(double x1);
inline constexpr double kNoiseSd = 0.5;
}  // namespace dgp

struct DgpConfig {
  std::size_t n = 1000;
  ErMode er_mode = ErMode::violated;
  Mechanism mechanism = Mechanism::direct_multiplicative;
  std::uint64_t seed = 1;
  bool keep_latents = false;
};

struct Latents {
  std::vector<double> u;
  std::vector<std::uint8_t> a_z0, a_z1;
  /// mean_y_az[2*a + z][i] = E[Y^{a,z} | U_i, X_i] for the emitted outcome.
  std::array<std::vector<double>, 4> mean_y_az;
  std::vector<double> y_violated;
  std::vector<double> y_satisfied;
};

struct SimulatedSample {
  Dataset ds;
  std::optional<Latents> latents;
};

/// Draw order per row: X1, X2, U, Z, then one uniform (direct) or eps_0,
/// eps_1 (and_gate), then the outcome noise. One generator per call.
SimulatedSample generate(const DgpConfig& cfg);

/// u, a_z0, a_z1 and the four potential-outcome means as CSV columns.
std::vector<ExtraColumn> latent_columns(const Latents& latents);

/// True nuisances at x in [0,1]^2, with 64-node Gauss-Legendre over U.
RawPoint oracle_nuisances(double x1, double x2, ErMode er);
RawPoint oracle_nuisances(std::span<const double> x, ErMode er);

/// All rows of `ds` evaluated under the oracle; folds copied when given.
RawNuisances oracle_raw_nuisances(const Dataset& ds, ErMode er,
                                  const FoldAssignment* folds = nullptr, bool single_arm = true);

/// Oracle learners for every nuisance regression (ignore training data).
NuisanceLearners oracle_learners(ErMode er);

/// E[U | A=1] and E[U^2 | A=1]: f(U | A=1, Z, X) is proportional to exp(-u).
double treated_u_mean();
double treated_u_second_moment();

/// Conditional ATT E[beta_A | A=1, X=x].
double oracle_conditional_att(double x1, double x2);

/// Pr(A=1) by 2-D quadrature.
double oracle_treated_fraction();

/// E[beta_Z(X) | A=1]; zero when the exclusion restriction holds.
double oracle_direct_effect_treated(ErMode er);

enum class OracleMethod { quadrature, monte_carlo };

/// Marginal ATT. monte_carlo needs size >= 1e6 and averages Y^1 - Y^0 over
/// the treated in one simulated draw.
double oracle_att(OracleMethod method, std::size_t size = 0, std::uint64_t seed = 20240607);

}  // namespace mqiv
