#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mqiv/estimators.hpp"
#include "mqiv/simulation.hpp"

namespace mqiv {

struct McConfig {
  std::vector<std::size_t> sample_sizes{600, 2400, 7200};
  std::size_t replications = 200;
  std::vector<EstimatorKind> estimators{EstimatorKind::w1, EstimatorKind::if1, EstimatorKind::w2,
                                        EstimatorKind::w3};
  /// "oracle" or a learner string accepted by LearnerSpec::parse.
  std::string learner = "oracle";
  int k_folds = 5;
  ErMode er_mode = ErMode::violated;
  Mechanism mechanism = Mechanism::direct_multiplicative;
  std::uint64_t base_seed = 1;
  double ci_level = 0.95;
  unsigned jobs = 1;
  /// Largest tolerated fraction of failed replications per cell.
  double max_failure_fraction = 0.05;

  void check() const;
};

/// Summary for one (estimator, N) cell. ASE and coverage exist only for
/// estimators that report a standard error.
struct McCell {
  std::string estimator;
  std::size_t n = 0;
  double target = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::map<std::string, std::size_t> failure_reasons;
  double mean_point = 0.0;
  double bias = 0.0;
  std::optional<double> ase;
  double ese = 0.0;
  std::optional<double> coverage;
};

struct McReport {
  McConfig config;
  double oracle_att = 0.0;
  double oracle_direct_effect = 0.0;
  std::vector<McCell> cells;

  const McCell* find(std::string_view estimator, std::size_t n) const;
  bool failures_within_tolerance() const;
};

/// Called after each replication with (completed, total).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Replication r at every sample size draws from seed base_seed + r. Results
/// do not depend on `jobs`. The phi estimator is scored against the average
/// direct effect among the treated; every other estimator against the ATT.
McReport run_study(const McConfig& cfg, const ProgressFn& progress = {});

std::string report_json(const McReport& report);
/// Bias / ASE / ESE / Coverage rows per sample-size block.
std::string report_table(const McReport& report);

}  // namespace mqiv
