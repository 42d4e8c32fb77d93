#include "mqiv/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mqiv/error.hpp"

namespace mqiv {

void McConfig::check() const {
  if (replications < 1) throw ArgumentError("replications must be >= 1");
  if (sample_sizes.empty()) throw ArgumentError("at least one sample size is required");
  for (auto n : sample_sizes)
    if (n < 1) throw ArgumentError("sample sizes must be positive");
  if (estimators.empty()) throw ArgumentError("at least one estimator is required");
  if (k_folds < 2) throw ArgumentError("k_folds must be >= 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ArgumentError("ci_level must lie in (0,1)");
  if (jobs < 1) throw ArgumentError("jobs must be >= 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw ArgumentError("max_failure_fraction must lie in [0,1]");
  if (learner != "oracle") LearnerSpec::parse(learner).check();
}

const McCell* McReport::find(std::string_view estimator, std::size_t n) const {
  for (const auto& c : cells)
    if (c.estimator == estimator && c.n == n) return &c;
  return nullptr;
}

bool McReport::failures_within_tolerance() const {
  for (const auto& c : cells) {
    const double total = static_cast<double>(c.successes + c.failures);
    if (total > 0 && static_cast<double>(c.failures) / total > config.max_failure_fraction)
      return false;
  }
  return true;
}

namespace {

struct RepOutcome {
  bool ok = false;
  std::string reason;
  double point = 0.0;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
};

// splitmix64 finalizer; decorrelates the fold split from the data draw.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<RepOutcome> one_replication(const McConfig& cfg, std::size_t n, std::uint64_t seed) {
  const auto m = cfg.estimators.size();
  std::vector<RepOutcome> out(m);
  auto fail_all = [&](const std::string& why) {
    for (auto& o : out) {
      o.ok = false;
      o.reason = why;
    }
    return out;
  };
  try {
    const auto sample = generate({n, cfg.er_mode, cfg.mechanism, seed, false});
    const auto& ds = sample.ds;
    const auto folds = split_folds(n, cfg.k_folds, mix(seed));
    const bool single_arm = needs_single_arm(cfg.estimators);
    RawNuisances raw;
    if (cfg.learner == "oracle") {
      raw = oracle_raw_nuisances(ds, cfg.er_mode, &folds, single_arm);
    } else {
      raw = fit_raw_nuisances(ds, folds, LearnerSpec::parse(cfg.learner, mix(seed + 1)), single_arm);
    }
    const auto derived = derive(raw);
    for (std::size_t j = 0; j < m; ++j) {
      try {
        const auto r = run_estimator(cfg.estimators[j], ds, folds, raw, derived, cfg.ci_level);
        if (!std::isfinite(r.point)) throw EstimationError("non-finite point estimate");
        out[j] = {true, {}, r.point, r.se, r.ci};
      } catch (const std::exception& e) {
        out[j].ok = false;
        out[j].reason = e.what();
      }
    }
    return out;
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

McReport run_study(const McConfig& cfg, const ProgressFn& progress) {
  cfg.check();
  McReport report;
  report.config = cfg;
  report.oracle_att = oracle_att(OracleMethod::quadrature);
  report.oracle_direct_effect = oracle_direct_effect_treated(cfg.er_mode);

  const auto reps = cfg.replications;
  const auto n_sizes = cfg.sample_sizes.size();
  const auto total = reps * n_sizes;
  // results[size_index * reps + r]
  std::vector<std::vector<RepOutcome>> results(total);

  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  auto worker = [&] {
    for (;;) {
      const auto task = next.fetch_add(1);
      if (task >= total) return;
      const auto s = task / reps;
      const auto r = task % reps;
      results[task] = one_replication(cfg, cfg.sample_sizes[s], cfg.base_seed + r);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(++done, total);
      }
    }
  };
  const unsigned jobs = std::min<std::size_t>(cfg.jobs, total);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t s = 0; s < n_sizes; ++s) {
    for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
      McCell cell;
      cell.estimator = std::string(to_string(cfg.estimators[j]));
      cell.n = cfg.sample_sizes[s];
      cell.target = cfg.estimators[j] == EstimatorKind::phi ? report.oracle_direct_effect
                                                            : report.oracle_att;
      std::vector<double> points;
      double se_sum = 0.0;
      std::size_t se_count = 0, covered = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& o = results[s * reps + r][j];
        if (!o.ok) {
          ++cell.failures;
          ++cell.failure_reasons[o.reason];
          continue;
        }
        points.push_back(o.point);
        if (o.se && o.ci) {
          se_sum += *o.se;
          ++se_count;
          if (o.ci->low <= cell.target && cell.target <= o.ci->high) ++covered;
        }
      }
      cell.successes = points.size();
      if (!points.empty()) {
        double sum = 0.0;
        for (double p : points) sum += p;
        cell.mean_point = sum / static_cast<double>(points.size());
        cell.bias = cell.mean_point - cell.target;
        cell.ese = sample_sd(points, cell.mean_point);
      }
      if (se_count > 0) {
        cell.ase = se_sum / static_cast<double>(se_count);
        cell.coverage = static_cast<double>(covered) / static_cast<double>(se_count);
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string report_json(const McReport& report) {
  using nlohmann::ordered_json;
  const auto& c = report.config;
  ordered_json cfg;
  cfg["sample_sizes"] = c.sample_sizes;
  cfg["replications"] = c.replications;
  ordered_json est = ordered_json::array();
  for (auto k : c.estimators) est.push_back(std::string(to_string(k)));
  cfg["estimators"] = est;
  cfg["learner"] = c.learner;
  cfg["k_folds"] = c.k_folds;
  cfg["er_mode"] = std::string(to_string(c.er_mode));
  cfg["mechanism"] = std::string(to_string(c.mechanism));
  cfg["base_seed"] = c.base_seed;
  cfg["ci_level"] = c.ci_level;

  ordered_json cells = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json j;
    j["estimator"] = cell.estimator;
    j["n"] = cell.n;
    j["target"] = cell.target;
    j["successes"] = cell.successes;
    j["failures"] = cell.failures;
    ordered_json reasons = ordered_json::object();
    for (const auto& [why, count] : cell.failure_reasons) reasons[why] = count;
    j["failure_reasons"] = reasons;
    j["mean_point"] = cell.mean_point;
    j["bias"] = cell.bias;
    j["ase"] = cell.ase ? ordered_json(*cell.ase) : ordered_json(nullptr);
    j["ese"] = cell.ese;
    j["coverage"] = cell.coverage ? ordered_json(*cell.coverage) : ordered_json(nullptr);
    cells.push_back(std::move(j));
  }

  ordered_json root;
  root["config"] = cfg;
  root["oracle_att"] = report.oracle_att;
  root["oracle_direct_effect"] = report.oracle_direct_effect;
  root["cells"] = cells;
  return root.dump(2) + "\n";
}

std::string report_table(const McReport& report) {
  const auto& cfg = report.config;
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", report.oracle_att);
  os << "Oracle ATT " << buf << "; " << cfg.replications << " replications; learner "
     << cfg.learner << "; ER " << to_string(cfg.er_mode) << "\n";

  auto cell_text = [&](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  for (auto n : cfg.sample_sizes) {
    os << "\nN = " << n << "\n";
    std::snprintf(buf, sizeof buf, "%-10s", "");
    os << buf;
    for (auto k : cfg.estimators) {
      std::string name(to_string(k));
      for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      std::snprintf(buf, sizeof buf, "%10s", name.c_str());
      os << buf;
    }
    os << "\n";
    const char* rows[4] = {"Bias", "ASE", "ESE", "Coverage"};
    for (int row = 0; row < 4; ++row) {
      std::snprintf(buf, sizeof buf, "%-10s", rows[row]);
      os << buf;
      for (auto k : cfg.estimators) {
        const auto* cell = report.find(to_string(k), n);
        std::optional<double> v;
        if (cell && cell->successes > 0) {
          switch (row) {
            case 0: v = cell->bias; break;
            case 1: v = cell->ase; break;
            case 2: v = cell->ese; break;
            default: v = cell->coverage; break;
          }
        }
        const auto text = cell_text(v);
        std::snprintf(buf, sizeof buf, "%10s", text.c_str());
        os << buf;
      }
      os << "\n";
    }
    std::size_t failed = 0;
    for (auto k : cfg.estimators)
      if (const auto* cell = report.find(to_string(k), n)) failed += cell->failures;
    if (failed) os << "failed estimator runs: " << failed << "\n";
  }
  return os.str();
}

}  // namespace mqiv
