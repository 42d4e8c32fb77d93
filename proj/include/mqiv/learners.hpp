#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mqiv/dataset.hpp"

namespace mqiv {

enum class LearnerKind { least_squares, logistic, knn, boosted_stumps, cv_ensemble, oracle };

std::string_view to_string(LearnerKind kind);

/// What a fitted model predicts. Probability models are clipped on output.
enum class Target { regression, probability };

using OracleFunction = std::function<double(std::span<const double>)>;

/// Learner configuration: a kind plus kind-specific hyperparameters.
///
///   least_squares   degree (0, 1 or 2; polynomial expansion with intercept)
///   logistic        degree (0, 1 or 2)
///   knn             k
///   boosted_stumps  rounds, learning_rate, max_depth (must be 1), min_leaf
///   cv_ensemble     inner_k, plus `candidates` and `seed`
///   oracle          a fixed function of x; ignores training data
struct LearnerSpec {
  LearnerKind kind = LearnerKind::least_squares;
  std::map<std::string, double> hyper;
  std::vector<LearnerSpec> candidates;
  std::uint64_t seed = 0;
  OracleFunction oracle_fn;
  std::string label;
  double clip_lo = 0.01;
  double clip_hi = 0.99;

  static LearnerSpec least_squares(int degree = 1);
  static LearnerSpec logistic(int degree = 1);
  static LearnerSpec knn(int k = 25);
  static LearnerSpec boosted_stumps(int rounds = 200, double learning_rate = 0.1, int min_leaf = 10);
  static LearnerSpec cv_ensemble(std::vector<LearnerSpec> candidates, int inner_k = 5,
                                 std::uint64_t seed = 0);
  static LearnerSpec oracle(OracleFunction fn, std::string label = "oracle");

  /// cv_ensemble over {least_squares degree 2, knn, boosted_stumps}.
  static LearnerSpec default_ensemble(std::uint64_t seed = 0);

  /// Parses "kind" or "kind:key=value,key=value". "cv_ensemble" with no
  /// candidates gets the default library. "oracle" cannot be parsed.
  static LearnerSpec parse(std::string_view text, std::uint64_t seed = 0);

  double param(const std::string& key) const;
  std::string describe() const;

  /// Throws ArgumentError when hyperparameters are missing or out of range.
  void check() const;
};

namespace detail {
class Predictor;
}

/// Immutable fitted model; cheap to copy and safe to share across threads.
class FittedModel {
 public:
  FittedModel(std::shared_ptr<const detail::Predictor> impl, LearnerKind kind, std::size_t dim,
              Target target, double clip_lo, double clip_hi, std::vector<std::string> flags,
              std::vector<double> weights = {});

  /// Clipped to [clip_lo, clip_hi] for probability models.
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const RowMatrix& x) const;
  /// Output before clipping.
  double predict_raw(std::span<const double> x) const;

  LearnerKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  bool is_probability() const noexcept { return target_ == Target::probability; }
  /// Diagnostics such as "ridge_fallback", "irls_not_converged", "dropped:...".
  const std::vector<std::string>& flags() const noexcept { return flags_; }
  /// Convex weights per surviving candidate (cv_ensemble only).
  const std::vector<double>& ensemble_weights() const noexcept { return weights_; }

 private:
  std::shared_ptr<const detail::Predictor> impl_;
  LearnerKind kind_;
  std::size_t dim_;
  Target target_;
  double clip_lo_;
  double clip_hi_;
  std::vector<std::string> flags_;
  std::vector<double> weights_;
};

/// Fits `spec` to (features, targets). Deterministic: the only randomness is
/// the cv_ensemble inner split, seeded from the spec.
FittedModel fit(const LearnerSpec& spec, const RowMatrix& features,
                std::span<const double> targets, Target target);

/// Convex stacking: inner K-fold out-of-fold predictions per candidate, simplex
/// weights minimizing squared error, then every candidate refit on all rows.
FittedModel cv_ensemble_fit(const std::vector<LearnerSpec>& candidates, const RowMatrix& features,
                            std::span<const double> targets, Target target, int inner_k,
                            std::uint64_t seed, double clip_lo = 0.01, double clip_hi = 0.99);

/// Intercept plus polynomial terms up to `degree` (0, 1 or 2; degree 2 adds
/// all products x_i x_j with i <= j).
Eigen::MatrixXd polynomial_design(const RowMatrix& x, int degree);
Eigen::VectorXd polynomial_features(std::span<const double> x, int degree);

/// Bernoulli log-likelihood sum_i [y_i eta_i - log(1 + exp(eta_i))].
double logistic_log_likelihood(const Eigen::MatrixXd& design, std::span<const double> y,
                               const Eigen::VectorXd& beta);
/// Gradient of logistic_log_likelihood with respect to beta.
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, std::span<const double> y,
                                  const Eigen::VectorXd& beta);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace mqiv
