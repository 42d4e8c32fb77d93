#include <cmath>
#include <limits>

#include "mqiv/error.hpp"
#include "predictors.hpp"

namespace mqiv {

namespace {

Eigen::Index n_terms(Eigen::Index d, int degree) {
  switch (degree) {
    case 0: return 1;
    case 1: return 1 + d;
    case 2: return 1 + d + d * (d + 1) / 2;
    default: throw ArgumentError("polynomial degree must be 0, 1 or 2");
  }
}

template <class Row, class Out>
void expand(const Row& x, Eigen::Index d, int degree, Out&& out) {
  out(0) = 1.0;
  if (degree == 0) return;
  Eigen::Index c = 1;
  for (Eigen::Index j = 0; j < d; ++j) out(c++) = x[j];
  if (degree == 1) return;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) out(c++) = x[i] * x[j];
}

double log1p_exp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

Eigen::MatrixXd polynomial_design(const RowMatrix& x, int degree) {
  const auto d = x.cols();
  Eigen::MatrixXd out(x.rows(), n_terms(d, degree));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double* row = x.data() + i * d;
    expand(row, d, degree, [&](Eigen::Index c) -> double& { return out(i, c); });
  }
  return out;
}

Eigen::VectorXd polynomial_features(std::span<const double> x, int degree) {
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd out(n_terms(d, degree));
  expand(x.data(), d, degree, [&](Eigen::Index c) -> double& { return out(c); });
  return out;
}

double logistic_log_likelihood(const Eigen::MatrixXd& design, std::span<const double> y,
                               const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta(i) - log1p_exp(eta(i));
  return ll;
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, std::span<const double> y,
                                  const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = y[i] - sigmoid(eta(i));
  return design.transpose() * resid;
}

namespace detail {

namespace {

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(Eigen::VectorXd beta, int degree, bool logistic)
      : beta_(std::move(beta)), degree_(degree), logistic_(logistic) {}

  double raw(std::span<const double> x) const override {
    const double eta = polynomial_features(x, degree_).dot(beta_);
    return logistic_ ? sigmoid(eta) : eta;
  }

 private:
  Eigen::VectorXd beta_;
  int degree_;
  bool logistic_;
};

constexpr double kRidgeJitter = 1e-8;
constexpr int kIrlsMaxIter = 100;
constexpr double kIrlsTol = 1e-8;

}  // namespace

FitOutput fit_least_squares(const RowMatrix& x, std::span<const double> y, int degree) {
  const Eigen::MatrixXd design = polynomial_design(x, degree);
  if (design.rows() < design.cols())
    throw EstimationError("least_squares needs at least " + std::to_string(design.cols()) +
                          " rows, got " + std::to_string(design.rows()));
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));

  FitOutput out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd beta;
  if (qr.rank() == design.cols()) {
    beta = qr.solve(target);
  } else {
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += kRidgeJitter;
    beta = gram.ldlt().solve(design.transpose() * target);
    out.flags.push_back("ridge_fallback");
  }
  out.predictor = std::make_shared<LinearPredictor>(std::move(beta), degree, false);
  return out;
}

FitOutput fit_logistic(const RowMatrix& x, std::span<const double> y, int degree) {
  const Eigen::MatrixXd design = polynomial_design(x, degree);
  if (design.rows() < design.cols())
    throw EstimationError("logistic needs at least " + std::to_string(design.cols()) +
                          " rows, got " + std::to_string(design.rows()));
  const auto n = design.rows();
  const auto p = design.cols();

  FitOutput out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  bool converged = false;
  for (int iter = 0; iter < kIrlsMaxIter; ++iter) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd weight(n), resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(eta(i));
      weight(i) = std::max(mu * (1.0 - mu), 1e-10);
      resid(i) = y[i] - mu;
    }
    Eigen::MatrixXd info = design.transpose() * weight.asDiagonal() * design;
    info.diagonal().array() += kRidgeJitter;
    const Eigen::VectorXd step = info.ldlt().solve(design.transpose() * resid);
    if (!step.allFinite()) break;
    beta += step;
    if (step.cwiseAbs().maxCoeff() < kIrlsTol) {
      converged = true;
      break;
    }
  }
  if (!converged) out.flags.push_back("irls_not_converged");
  out.predictor = std::make_shared<LinearPredictor>(std::move(beta), degree, true);
  return out;
}

}  // namespace detail
}  // namespace mqiv
