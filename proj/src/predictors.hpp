#pragma once

#include <span>
#include <string>
#include <vector>

#include "mqiv/learners.hpp"

namespace mqiv::detail {

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double raw(std::span<const double> x) const = 0;
};

struct FitOutput {
  std::shared_ptr<const Predictor> predictor;
  std::vector<std::string> flags;
};

// Column means and standard deviations of the training fold; constant columns
// get sd 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  static Standardizer from(const RowMatrix& x);
  RowMatrix apply(const RowMatrix& x) const;
  void apply(std::span<const double> x, std::span<double> out) const;
};

FitOutput fit_least_squares(const RowMatrix& x, std::span<const double> y, int degree);
FitOutput fit_logistic(const RowMatrix& x, std::span<const double> y, int degree);
FitOutput fit_knn(const RowMatrix& x, std::span<const double> y, int k);
FitOutput fit_boosted_stumps(const RowMatrix& x, std::span<const double> y, int rounds,
                             double learning_rate, int min_leaf);

}  // namespace mqiv::detail
