#include "mqiv/nuisance.hpp"

#include <cmath>

#include "mqiv/error.hpp"

namespace mqiv {

DerivedPoint derive_point(const RawPoint& r, double denom_floor) {
  DerivedPoint d;
  d.phi = r.e11 - r.e10;
  d.delta_a = r.p1 - r.p0;
  if (std::abs(d.delta_a) < denom_floor) {
    d.delta_a = std::signbit(d.delta_a) ? -denom_floor : denom_floor;
    d.floored = true;
  }
  d.delta_star = (r.e1 - r.e0 - d.phi) / d.delta_a;
  d.rho = r.p1 * r.pi1 + r.p0 * r.pi0();
  d.w = r.e1 * r.pi1 + r.e0 * r.pi0() - d.rho * d.delta_star - r.pi1 * d.phi;
  return d;
}

RawPoint RawNuisances::at(std::size_t i) const {
  RawPoint r{e0[i], e1[i], e10[i], e11[i], p0[i], p1[i], pi1[i], 0.0, 0.0};
  if (has_single_arm()) {
    r.m0 = m0[i];
    r.m1 = m1[i];
  }
  return r;
}

void RawNuisances::resize(std::size_t n, bool single_arm) {
  for (auto* v : {&e0, &e1, &e10, &e11, &p0, &p1, &pi1}) v->assign(n, 0.0);
  m0.assign(single_arm ? n : 0, 0.0);
  m1.assign(single_arm ? n : 0, 0.0);
  fold_of.assign(n, 0);
}

void RawNuisances::set(std::size_t i, const RawPoint& r) {
  e0[i] = r.e0;
  e1[i] = r.e1;
  e10[i] = r.e10;
  e11[i] = r.e11;
  p0[i] = r.p0;
  p1[i] = r.p1;
  pi1[i] = r.pi1;
  if (has_single_arm()) {
    m0[i] = r.m0;
    m1[i] = r.m1;
  }
}

ClipCounts RawNuisances::clip_counts(double lo, double hi) const {
  ClipCounts c;
  auto count = [&](const std::vector<double>& v) {
    std::size_t n = 0;
    for (double x : v) n += (x <= lo || x >= hi);
    return n;
  };
  c.p0 = count(p0);
  c.p1 = count(p1);
  c.pi1 = count(pi1);
  return c;
}

DerivedPoint DerivedNuisances::at(std::size_t i) const {
  DerivedPoint d{phi[i], delta_a[i], delta_star[i], rho[i], w[i], false};
  return d;
}

DerivedNuisances derive(const RawNuisances& raw, double denom_floor) {
  const auto n = raw.size();
  DerivedNuisances out;
  for (auto* v : {&out.phi, &out.delta_a, &out.delta_star, &out.rho, &out.w}) v->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = derive_point(raw.at(i), denom_floor);
    out.phi[i] = d.phi;
    out.delta_a[i] = d.delta_a;
    out.delta_star[i] = d.delta_star;
    out.rho[i] = d.rho;
    out.w[i] = d.w;
    if (d.floored) out.floored.push_back(i);
  }
  return out;
}

NuisanceLearners NuisanceLearners::uniform(const LearnerSpec& spec) {
  return {spec, spec, spec, spec, spec, spec, spec, spec, spec};
}

namespace {

struct Cell {
  std::vector<std::size_t> rows;
};

RowMatrix rows_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ds.d()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = ds.x().row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

template <class F>
std::vector<double> values_of(const std::vector<std::size_t>& idx, F&& f) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(f(i));
  return out;
}

}  // namespace

RawNuisances fit_raw_nuisances(const Dataset& ds, const FoldAssignment& folds,
                               const NuisanceLearners& learners, bool need_single_arm) {
  if (folds.fold_of.size() != ds.n())
    throw ArgumentError("fold assignment length does not match dataset");
  RawNuisances raw;
  raw.resize(ds.n(), need_single_arm);
  raw.fold_of = folds.fold_of;
  raw.k = folds.k;

  const auto& y = ds.y();
  const auto& a = ds.a();
  const auto& z = ds.z();

  for (int k = 0; k < folds.k; ++k) {
    const auto train = folds.complement(k);
    const auto eval = folds.members(k);
    if (eval.empty()) continue;

    std::vector<std::size_t> by_z[2], treated_by_z[2], untreated;
    for (auto i : train) {
      by_z[z[i]].push_back(i);
      if (a[i]) treated_by_z[z[i]].push_back(i);
      else untreated.push_back(i);
    }
    for (int v = 0; v < 2; ++v) {
      if (by_z[v].empty()) throw EmptyCellError("(Z=" + std::to_string(v) + ")", k);
      if (treated_by_z[v].empty()) throw EmptyCellError("(A=1,Z=" + std::to_string(v) + ")", k);
    }
    if (untreated.empty()) throw EmptyCellError("(A=0)", k);

    auto run = [&](const char* name, const LearnerSpec& spec, const std::vector<std::size_t>& idx,
                   const std::vector<double>& target, Target kind, std::vector<double>& dest) {
      const auto model = fit(spec, rows_of(ds, idx), target, kind);
      for (const auto& f : model.flags())
        raw.learner_flags.push_back("fold " + std::to_string(k) + " " + name + ": " + f);
      for (auto i : eval) dest[i] = model.predict(ds.row(i));
    };
    auto outcome = [&](std::size_t i) { return y[i]; };
    auto treat = [&](std::size_t i) { return static_cast<double>(a[i]); };

    run("e0", learners.e0, by_z[0], values_of(by_z[0], outcome), Target::regression, raw.e0);
    run("e1", learners.e1, by_z[1], values_of(by_z[1], outcome), Target::regression, raw.e1);
    run("e10", learners.e10, treated_by_z[0], values_of(treated_by_z[0], outcome),
        Target::regression, raw.e10);
    run("e11", learners.e11, treated_by_z[1], values_of(treated_by_z[1], outcome),
        Target::regression, raw.e11);
    run("p0", learners.p0, by_z[0], values_of(by_z[0], treat), Target::probability, raw.p0);
    run("p1", learners.p1, by_z[1], values_of(by_z[1], treat), Target::probability, raw.p1);
    run("pi1", learners.pi1, train,
        values_of(train, [&](std::size_t i) { return static_cast<double>(z[i]); }),
        Target::probability, raw.pi1);
    if (need_single_arm) {
      auto untreated_y = [&](std::size_t i) { return a[i] ? 0.0 : y[i]; };
      run("m0", learners.m0, by_z[0], values_of(by_z[0], untreated_y), Target::regression, raw.m0);
      run("m1", learners.m1, by_z[1], values_of(by_z[1], untreated_y), Target::regression, raw.m1);
    }
  }

  for (const auto* v : {&raw.e0, &raw.e1, &raw.e10, &raw.e11})
    for (double x : *v)
      if (!std::isfinite(x)) throw EstimationError("non-finite outcome regression prediction");
  return raw;
}

RawNuisances fit_raw_nuisances(const Dataset& ds, const FoldAssignment& folds,
                               const LearnerSpec& spec, bool need_single_arm) {
  return fit_raw_nuisances(ds, folds, NuisanceLearners::uniform(spec), need_single_arm);
}

WConsistency w_consistency_check(const RawNuisances& raw, const DerivedNuisances& derived) {
  if (raw.size() != derived.size()) throw ArgumentError("raw and derived sizes differ");
  WConsistency out;
  out.floored = derived.floored;
  std::size_t next_floored = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double gap = std::abs(derived.w[i] - (raw.e0[i] - raw.p0[i] * derived.delta_star[i]));
    out.max_discrepancy = std::max(out.max_discrepancy, gap);
    const bool floored = next_floored < out.floored.size() && out.floored[next_floored] == i;
    if (floored) ++next_floored;
    else out.max_discrepancy_unfloored = std::max(out.max_discrepancy_unfloored, gap);
  }
  return out;
}

}  // namespace mqiv
