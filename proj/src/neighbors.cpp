#include <algorithm>
#include <numeric>

#include "mqiv/error.hpp"
#include "predictors.hpp"

namespace mqiv::detail {

Standardizer Standardizer::from(const RowMatrix& x) {
  Standardizer s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    s.sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

RowMatrix Standardizer::apply(const RowMatrix& x) const {
  RowMatrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.col(j) = (x.col(j).array() - mean(j)) / sd(j);
  return out;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean(j)) / sd(j);
}

namespace {

class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(Standardizer scale, RowMatrix points, std::vector<double> targets, std::size_t k)
      : scale_(std::move(scale)), points_(std::move(points)), targets_(std::move(targets)), k_(k) {}

  double raw(std::span<const double> x) const override {
    const auto d = static_cast<std::size_t>(points_.cols());
    std::vector<double> q(d);
    scale_.apply(x, q);

    const auto n = static_cast<std::size_t>(points_.rows());
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = points_.data() + i * d;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = p[j] - q[j];
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    // Ties broken by training index so predictions are deterministic.
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_ - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_));
    double sum = 0.0;
    for (std::size_t r = 0; r < k_; ++r) sum += targets_[dist[r].second];
    return sum / static_cast<double>(k_);
  }

 private:
  Standardizer scale_;
  RowMatrix points_;
  std::vector<double> targets_;
  std::size_t k_;
};

}  // namespace

FitOutput fit_knn(const RowMatrix& x, std::span<const double> y, int k) {
  if (x.rows() == 0) throw EstimationError("knn needs at least one training row");
  FitOutput out;
  auto kk = static_cast<std::size_t>(k);
  if (kk > static_cast<std::size_t>(x.rows())) {
    kk = static_cast<std::size_t>(x.rows());
    out.flags.push_back("knn_k_truncated");
  }
  auto scale = Standardizer::from(x);
  RowMatrix pts = scale.apply(x);
  out.predictor = std::make_shared<KnnPredictor>(std::move(scale), std::move(pts),
                                                 std::vector<double>(y.begin(), y.end()), kk);
  return out;
}

}  // namespace mqiv::detail
