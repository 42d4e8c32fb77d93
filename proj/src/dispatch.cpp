#include <algorithm>
#include <cctype>
#include <string>

#include "mqiv/error.hpp"
#include "mqiv/estimators.hpp"

namespace mqiv {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::w1: return "w1";
    case EstimatorKind::if1: return "if1";
    case EstimatorKind::w2: return "w2";
    case EstimatorKind::w3: return "w3";
    case EstimatorKind::phi: return "phi";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)))
      t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "w1") return EstimatorKind::w1;
  if (t == "if1") return EstimatorKind::if1;
  if (t == "w2") return EstimatorKind::w2;
  if (t == "w3") return EstimatorKind::w3;
  if (t == "phi") return EstimatorKind::phi;
  throw ArgumentError("unknown estimator '" + std::string(text) +
                      "' (expected w1, if1, w2, w3 or phi)");
}

std::vector<EstimatorKind> parse_estimator_list(std::string_view text) {
  std::vector<EstimatorKind> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    const auto kind = parse_estimator(piece);
    if (std::find(out.begin(), out.end(), kind) == out.end()) out.push_back(kind);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool needs_single_arm(std::span<const EstimatorKind> kinds) {
  return std::find(kinds.begin(), kinds.end(), EstimatorKind::w3) != kinds.end();
}

EstimateResult run_estimator(EstimatorKind kind, const Dataset& ds, const FoldAssignment& folds,
                             const RawNuisances& raw, const DerivedNuisances& derived,
                             double level) {
  switch (kind) {
    case EstimatorKind::w1: return estimate_plugin_mqiv(ds, raw, derived);
    case EstimatorKind::if1: return estimate_eif_mqiv(ds, folds, raw, derived, level);
    case EstimatorKind::w2: return estimate_plugin_wald(ds, raw);
    case EstimatorKind::w3: return estimate_plugin_single_arm(ds, raw);
    case EstimatorKind::phi: return estimate_direct_effect_treated(ds, raw);
  }
  throw ArgumentError("invalid estimator kind");
}

}  // namespace mqiv
