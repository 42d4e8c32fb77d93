#include <cmath>

#include "mqiv/error.hpp"
#include "mqiv/estimators.hpp"

namespace mqiv {

std::string_view to_string(Perturbation p) {
  switch (p) {
    case Perturbation::m1: return "m1";
    case Perturbation::m2: return "m2";
    case Perturbation::m3: return "m3";
    case Perturbation::all_wrong: return "all-wrong";
  }
  return "unknown";
}

Perturbation parse_perturbation(std::string_view text) {
  std::string t(text);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto& c : t)
    if (c == '_') c = '-';
  if (t == "m1") return Perturbation::m1;
  if (t == "m2") return Perturbation::m2;
  if (t == "m3") return Perturbation::m3;
  if (t == "all-wrong") return Perturbation::all_wrong;
  throw ArgumentError("unknown perturbation mode '" + std::string(text) +
                      "' (expected m1, m2, m3 or all-wrong)");
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

RawPoint perturb(const RawPoint& t, double x1, double shift) {
  const double bump = shift * (1.0 + x1);
  RawPoint p = t;
  p.e0 += bump;
  p.e1 += 2.0 * bump;
  p.e10 += bump;
  p.e11 += 2.0 * bump;
  p.m0 += bump;
  p.m1 += 2.0 * bump;
  p.p0 = expit(logit(t.p0) - bump);
  p.p1 = expit(logit(t.p1) + bump);
  p.pi1 = expit(logit(t.pi1) + bump);
  return p;
}

}  // namespace

ProbeResult robustness_probe(const Dataset& ds, const RawNuisances& truth, PerturbationMode mode,
                             double delta_star_marginal) {
  if (!(mode.shift > 0.0)) throw ArgumentError("perturbation shift must be positive");
  if (truth.size() != ds.n()) throw ArgumentError("nuisance count does not match dataset rows");
  if (ds.d() < 1) throw ArgumentError("robustness probe needs at least one covariate");
  const double pr_a = ds.treated_fraction();
  if (!(pr_a > 0.0 && pr_a < 1.0)) throw EstimationError("treatment is degenerate");

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const RawPoint t = truth.at(i);
    const DerivedPoint td = derive_point(t);
    const RawPoint p = perturb(t, ds.row(i)[0], mode.shift);

    RawPoint r;
    DerivedPoint d;
    switch (mode.which) {
      case Perturbation::m1:
        r = p;
        r.p0 = t.p0;
        r.p1 = t.p1;
        r.pi1 = t.pi1;
        d = derive_point(r);
        break;
      case Perturbation::m2:
        r = t;
        r.p0 = p.p0;
        r.p1 = p.p1;
        r.pi1 = p.pi1;
        d = derive_point(r);
        d.delta_star = td.delta_star;
        d.phi = td.phi;
        d.w = td.w;
        break;
      case Perturbation::m3:
        r = t;
        r.p0 = p.p0;
        r.p1 = p.p1;
        r.e0 = p.e0;
        r.e1 = p.e1;
        d = derive_point(r);
        d.delta_star = td.delta_star;
        d.phi = td.phi;
        d.w = r.e1 * r.pi1 + r.e0 * r.pi0() - d.rho * d.delta_star - r.pi1 * d.phi;
        break;
      case Perturbation::all_wrong:
        r = p;
        d = derive_point(r);
        break;
      default:
        throw ArgumentError("invalid perturbation mode");
    }
    const double v = eif_contribution(observation(ds, i), r, d, delta_star_marginal, pr_a);
    sum += v;
    sum_sq += v * v;
  }
  ProbeResult out;
  out.n = ds.n();
  const auto n = static_cast<double>(ds.n());
  out.mean = sum / n;
  out.sd = std::sqrt(std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0)));
  out.se = out.sd / std::sqrt(n);
  return out;
}

}  // namespace mqiv
