#include "mqiv/learners.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <sstream>

#include "mqiv/error.hpp"
#include "predictors.hpp"

namespace mqiv {

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::least_squares: return "least_squares";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::knn: return "knn";
    case LearnerKind::boosted_stumps: return "boosted_stumps";
    case LearnerKind::cv_ensemble: return "cv_ensemble";
    case LearnerKind::oracle: return "oracle";
  }
  return "unknown";
}

LearnerSpec LearnerSpec::least_squares(int degree) {
  LearnerSpec s;
  s.kind = LearnerKind::least_squares;
  s.hyper["degree"] = degree;
  s.check();
  return s;
}

LearnerSpec LearnerSpec::logistic(int degree) {
  LearnerSpec s;
  s.kind = LearnerKind::logistic;
  s.hyper["degree"] = degree;
  s.check();
  return s;
}

LearnerSpec LearnerSpec::knn(int k) {
  LearnerSpec s;
  s.kind = LearnerKind::knn;
  s.hyper["k"] = k;
  s.check();
  return s;
}

LearnerSpec LearnerSpec::boosted_stumps(int rounds, double learning_rate, int min_leaf) {
  LearnerSpec s;
  s.kind = LearnerKind::boosted_stumps;
  s.hyper["rounds"] = rounds;
  s.hyper["learning_rate"] = learning_rate;
  s.hyper["max_depth"] = 1;
  s.hyper["min_leaf"] = min_leaf;
  s.check();
  return s;
}

LearnerSpec LearnerSpec::cv_ensemble(std::vector<LearnerSpec> candidates, int inner_k,
                                     std::uint64_t seed) {
  LearnerSpec s;
  s.kind = LearnerKind::cv_ensemble;
  s.hyper["inner_k"] = inner_k;
  s.candidates = std::move(candidates);
  s.seed = seed;
  s.check();
  return s;
}

LearnerSpec LearnerSpec::oracle(OracleFunction fn, std::string label) {
  LearnerSpec s;
  s.kind = LearnerKind::oracle;
  s.oracle_fn = std::move(fn);
  s.label = std::move(label);
  s.check();
  return s;
}

LearnerSpec LearnerSpec::default_ensemble(std::uint64_t seed) {
  return cv_ensemble({least_squares(2), knn(50), boosted_stumps(100, 0.1, 20)}, 5, seed);
}

namespace {

void require_int(const LearnerSpec& s, const std::string& key, double lo, double hi) {
  auto it = s.hyper.find(key);
  if (it == s.hyper.end())
    throw ArgumentError(std::string(to_string(s.kind)) + ": missing hyperparameter '" + key + "'");
  const double v = it->second;
  if (v != std::floor(v) || v < lo || v > hi) {
    std::ostringstream msg;
    msg << to_string(s.kind) << ": hyperparameter '" << key << "' = " << v << " outside [" << lo
        << ", " << hi << "] or not an integer";
    throw ArgumentError(msg.str());
  }
}

void allow_only(const LearnerSpec& s, std::initializer_list<std::string_view> keys) {
  for (const auto& [k, v] : s.hyper)
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ArgumentError(std::string(to_string(s.kind)) + ": unknown hyperparameter '" + k + "'");
}

}  // namespace

void LearnerSpec::check() const {
  if (!(clip_lo > 0.0 && clip_lo < clip_hi && clip_hi < 1.0))
    throw ArgumentError("probability clip bounds must satisfy 0 < lo < hi < 1");
  switch (kind) {
    case LearnerKind::least_squares:
    case LearnerKind::logistic:
      allow_only(*this, {"degree"});
      require_int(*this, "degree", 0, 2);
      break;
    case LearnerKind::knn:
      allow_only(*this, {"k"});
      require_int(*this, "k", 1, 1e9);
      break;
    case LearnerKind::boosted_stumps: {
      allow_only(*this, {"rounds", "learning_rate", "max_depth", "min_leaf"});
      require_int(*this, "rounds", 1, 1e6);
      auto it = hyper.find("learning_rate");
      if (it == hyper.end() || !(it->second > 0.0 && it->second <= 1.0))
        throw ArgumentError("boosted_stumps: learning_rate must be in (0, 1]");
      if (hyper.count("max_depth")) require_int(*this, "max_depth", 1, 1);
      if (hyper.count("min_leaf")) require_int(*this, "min_leaf", 1, 1e9);
      break;
    }
    case LearnerKind::cv_ensemble:
      allow_only(*this, {"inner_k"});
      require_int(*this, "inner_k", 2, 1e6);
      if (candidates.empty()) throw ArgumentError("cv_ensemble: candidate list is empty");
      for (const auto& c : candidates) {
        if (c.kind == LearnerKind::cv_ensemble)
          throw ArgumentError("cv_ensemble: candidates cannot be cv_ensemble");
        c.check();
      }
      break;
    case LearnerKind::oracle:
      if (!oracle_fn) throw ArgumentError("oracle: no function supplied");
      break;
  }
}

double LearnerSpec::param(const std::string& key) const {
  auto it = hyper.find(key);
  if (it == hyper.end()) throw ArgumentError("missing hyperparameter '" + key + "'");
  return it->second;
}

std::string LearnerSpec::describe() const {
  std::ostringstream out;
  out << to_string(kind);
  if (kind == LearnerKind::oracle && !label.empty()) out << '[' << label << ']';
  if (!hyper.empty()) {
    out << ':';
    bool first = true;
    for (const auto& [k, v] : hyper) {
      out << (first ? "" : ",") << k << '=' << v;
      first = false;
    }
  }
  if (kind == LearnerKind::cv_ensemble) {
    out << "{";
    for (std::size_t i = 0; i < candidates.size(); ++i)
      out << (i ? ";" : "") << candidates[i].describe();
    out << "}";
  }
  return out.str();
}

LearnerSpec LearnerSpec::parse(std::string_view text, std::uint64_t seed) {
  const auto colon = text.find(':');
  const std::string name(text.substr(0, colon));
  LearnerSpec s;
  if (name == "least_squares") s = least_squares(1);
  else if (name == "logistic") s = logistic(1);
  else if (name == "knn") s = knn();
  else if (name == "boosted_stumps") s = boosted_stumps();
  else if (name == "cv_ensemble") s = default_ensemble(seed);
  else if (name == "oracle") throw ArgumentError("oracle learners cannot be parsed from text");
  else throw ArgumentError("unknown learner kind '" + name + "'");

  if (colon != std::string_view::npos) {
    std::string rest(text.substr(colon + 1));
    std::istringstream items(rest);
    std::string item;
    while (std::getline(items, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ArgumentError("learner option '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq);
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(item.substr(eq + 1), &used);
        if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ArgumentError("learner option '" + item + "' has a non-numeric value");
      }
      if (key == "seed" && s.kind == LearnerKind::cv_ensemble) s.seed = static_cast<std::uint64_t>(value);
      else s.hyper[key] = value;
    }
  }
  s.check();
  return s;
}

FittedModel::FittedModel(std::shared_ptr<const detail::Predictor> impl, LearnerKind kind,
                         std::size_t dim, Target target, double clip_lo, double clip_hi,
                         std::vector<std::string> flags, std::vector<double> weights)
    : impl_(std::move(impl)), kind_(kind), dim_(dim), target_(target), clip_lo_(clip_lo),
      clip_hi_(clip_hi), flags_(std::move(flags)), weights_(std::move(weights)) {}

double FittedModel::predict_raw(std::span<const double> x) const {
  if (x.size() != dim_)
    throw ArgumentError("feature dimension mismatch: model expects " + std::to_string(dim_) +
                        ", got " + std::to_string(x.size()));
  return impl_->raw(x);
}

double FittedModel::predict(std::span<const double> x) const {
  const double v = predict_raw(x);
  return target_ == Target::probability ? std::clamp(v, clip_lo_, clip_hi_) : v;
}

std::vector<double> FittedModel::predict(const RowMatrix& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  const auto d = static_cast<std::size_t>(x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(std::span<const double>(x.data() + i * d, d));
  return out;
}

namespace {

class OraclePredictor final : public detail::Predictor {
 public:
  explicit OraclePredictor(OracleFunction fn) : fn_(std::move(fn)) {}
  double raw(std::span<const double> x) const override { return fn_(x); }

 private:
  OracleFunction fn_;
};

class WeightedSum final : public detail::Predictor {
 public:
  WeightedSum(std::vector<FittedModel> models, std::vector<double> weights)
      : models_(std::move(models)), weights_(std::move(weights)) {}

  double raw(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t c = 0; c < models_.size(); ++c)
      if (weights_[c] != 0.0) s += weights_[c] * models_[c].predict(x);
    return s;
  }

 private:
  std::vector<FittedModel> models_;
  std::vector<double> weights_;
};

void check_targets(std::span<const double> y, Target target) {
  for (double v : y) {
    if (!std::isfinite(v)) throw ArgumentError("non-finite training target");
    if (target == Target::probability && v != 0.0 && v != 1.0)
      throw ArgumentError("probability targets must be 0 or 1");
  }
}

}  // namespace

FittedModel fit(const LearnerSpec& spec, const RowMatrix& features, std::span<const double> targets,
                Target target) {
  spec.check();
  if (static_cast<std::size_t>(features.rows()) != targets.size())
    throw ArgumentError("features and targets have different lengths");
  check_targets(targets, target);
  const auto dim = static_cast<std::size_t>(features.cols());

  if (spec.kind == LearnerKind::cv_ensemble)
    return cv_ensemble_fit(spec.candidates, features, targets, target,
                           static_cast<int>(spec.param("inner_k")), spec.seed, spec.clip_lo,
                           spec.clip_hi);
  if (spec.kind == LearnerKind::oracle)
    return FittedModel(std::make_shared<OraclePredictor>(spec.oracle_fn), spec.kind, dim, target,
                       spec.clip_lo, spec.clip_hi, {});
  if (features.rows() == 0) throw EstimationError(std::string(to_string(spec.kind)) + ": no training rows");

  detail::FitOutput out;
  switch (spec.kind) {
    case LearnerKind::least_squares:
      out = detail::fit_least_squares(features, targets, static_cast<int>(spec.param("degree")));
      break;
    case LearnerKind::logistic:
      if (target != Target::probability)
        throw ArgumentError("logistic learner requires a binary probability target");
      out = detail::fit_logistic(features, targets, static_cast<int>(spec.param("degree")));
      break;
    case LearnerKind::knn:
      out = detail::fit_knn(features, targets, static_cast<int>(spec.param("k")));
      break;
    case LearnerKind::boosted_stumps:
      out = detail::fit_boosted_stumps(features, targets, static_cast<int>(spec.param("rounds")),
                                       spec.param("learning_rate"),
                                       spec.hyper.count("min_leaf") ? static_cast<int>(spec.param("min_leaf")) : 1);
      break;
    default:
      break;
  }
  return FittedModel(std::move(out.predictor), spec.kind, dim, target, spec.clip_lo, spec.clip_hi,
                     std::move(out.flags));
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const auto m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
  }
  return (v.array() - tau).cwiseMax(0.0).matrix();
}

namespace {

constexpr int kStackIterations = 500;
constexpr double kStackStep = 0.1;
constexpr double kStackTol = 1e-8;

RowMatrix take_rows(const RowMatrix& x, const std::vector<std::size_t>& idx) {
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

std::vector<double> take(std::span<const double> y, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

FittedModel cv_ensemble_fit(const std::vector<LearnerSpec>& candidates, const RowMatrix& features,
                            std::span<const double> targets, Target target, int inner_k,
                            std::uint64_t seed, double clip_lo, double clip_hi) {
  if (inner_k < 2) throw ArgumentError("cv_ensemble: inner_k must be at least 2");
  if (candidates.empty()) throw ArgumentError("cv_ensemble: candidate list is empty");
  for (const auto& c : candidates) {
    if (c.kind == LearnerKind::cv_ensemble) throw ArgumentError("cv_ensemble: nested ensembles not allowed");
    c.check();
  }
  check_targets(targets, target);
  const auto n = static_cast<std::size_t>(features.rows());
  const auto dim = static_cast<std::size_t>(features.cols());

  std::vector<std::string> flags;
  std::vector<const LearnerSpec*> alive;
  std::vector<Eigen::VectorXd> oof;

  if (candidates.size() == 1) {
    alive.push_back(&candidates.front());
  } else {
    if (n < static_cast<std::size_t>(inner_k))
      throw EstimationError("cv_ensemble: " + std::to_string(n) + " rows cannot fill " +
                            std::to_string(inner_k) + " inner folds");
    const auto folds = split_folds(n, inner_k, seed);
    std::vector<std::vector<std::size_t>> train(static_cast<std::size_t>(inner_k)),
        held(static_cast<std::size_t>(inner_k));
    for (int k = 0; k < inner_k; ++k) {
      train[static_cast<std::size_t>(k)] = folds.complement(k);
      held[static_cast<std::size_t>(k)] = folds.members(k);
    }
    for (const auto& cand : candidates) {
      Eigen::VectorXd pred(static_cast<Eigen::Index>(n));
      try {
        for (int k = 0; k < inner_k; ++k) {
          const auto& tr = train[static_cast<std::size_t>(k)];
          const auto ytr = take(targets, tr);
          const auto model = fit(cand, take_rows(features, tr), ytr, target);
          for (auto i : held[static_cast<std::size_t>(k)])
            pred(static_cast<Eigen::Index>(i)) = model.predict(std::span<const double>(features.data() + i * dim, dim));
        }
      } catch (const std::exception& e) {
        flags.push_back("dropped:" + cand.describe() + ": " + e.what());
        continue;
      }
      if (!pred.allFinite()) {
        flags.push_back("dropped:" + cand.describe() + ": non-finite predictions");
        continue;
      }
      alive.push_back(&cand);
      oof.push_back(std::move(pred));
    }
  }
  if (alive.empty()) throw EstimationError("cv_ensemble: every candidate failed to fit");

  Eigen::VectorXd w;
  if (alive.size() == 1) {
    w = Eigen::VectorXd::Ones(1);
  } else {
    const auto m = static_cast<Eigen::Index>(alive.size());
    Eigen::MatrixXd p(static_cast<Eigen::Index>(n), m);
    for (Eigen::Index c = 0; c < m; ++c) p.col(c) = oof[static_cast<std::size_t>(c)];
    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(n));
    // On the simplex sum_c w_c P_c - y = sum_c w_c (P_c - y), so the loss is
    // w' G w with G the residual Gram matrix. G is scaled by its largest
    // curvature along the simplex; uniform shifts of the gradient are absorbed
    // by the projection.
    const Eigen::MatrixXd resid = p.colwise() - y;
    Eigen::MatrixXd gram = resid.transpose() * resid / static_cast<double>(n);
    const Eigen::MatrixXd centre =
        Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    const Eigen::MatrixXd tangent = centre * gram * centre;
    double scale = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(tangent, Eigen::EigenvaluesOnly)
                       .eigenvalues()
                       .maxCoeff();
    const double largest_mse = gram.diagonal().maxCoeff();
    if (!(scale > 1e-12 * largest_mse)) scale = largest_mse;
    scale = std::max(scale, 1e-300);
    gram /= scale;

    w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    for (int it = 0; it < kStackIterations; ++it) {
      const Eigen::VectorXd grad = 2.0 * gram * w;
      Eigen::VectorXd next = project_to_simplex(w - kStackStep * grad);
      const double change = (next - w).cwiseAbs().maxCoeff();
      w = std::move(next);
      if (change < kStackTol) break;
    }
  }

  std::vector<FittedModel> models;
  std::vector<double> weights;
  for (std::size_t c = 0; c < alive.size(); ++c) {
    try {
      models.push_back(fit(*alive[c], features, targets, target));
    } catch (const std::exception& e) {
      flags.push_back("dropped:" + alive[c]->describe() + ": " + e.what());
      continue;
    }
    weights.push_back(w(static_cast<Eigen::Index>(c)));
    for (const auto& f : models.back().flags()) flags.push_back(alive[c]->describe() + ": " + f);
  }
  if (models.empty()) throw EstimationError("cv_ensemble: every candidate failed to refit");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw EstimationError("cv_ensemble: surviving candidates carry no weight");
  if (weights.size() != alive.size())
    for (double& v : weights) v /= total;

  auto impl = std::make_shared<WeightedSum>(std::move(models), weights);
  return FittedModel(std::move(impl), LearnerKind::cv_ensemble, dim, target, clip_lo, clip_hi,
                     std::move(flags), std::move(weights));
}

}  // namespace mqiv
