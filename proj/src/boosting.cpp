#include <algorithm>
#include <numeric>

#include "mqiv/error.hpp"
#include "predictors.hpp"

namespace mqiv::detail {

namespace {

struct Stump {
  Eigen::Index feature;
  double threshold;
  double left;
  double right;
};

class StumpEnsemble final : public Predictor {
 public:
  StumpEnsemble(Standardizer scale, double base, double rate, std::vector<Stump> stumps)
      : scale_(std::move(scale)), base_(base), rate_(rate), stumps_(std::move(stumps)) {}

  double raw(std::span<const double> x) const override {
    std::vector<double> q(x.size());
    scale_.apply(x, q);
    double f = 0.0;
    for (const auto& s : stumps_) f += q[static_cast<std::size_t>(s.feature)] <= s.threshold ? s.left : s.right;
    return base_ + rate_ * f;
  }

 private:
  Standardizer scale_;
  double base_;
  double rate_;
  std::vector<Stump> stumps_;
};

}  // namespace

// Squared-loss gradient boosting with depth-1 trees. Each round scans every
// feature's presorted order and takes the split with the largest reduction in
// residual sum of squares among splits leaving at least `min_leaf` rows
// on each side.
FitOutput fit_boosted_stumps(const RowMatrix& x_in, std::span<const double> y, int rounds,
                             double learning_rate, int min_leaf) {
  const auto n = static_cast<std::size_t>(x_in.rows());
  const auto d = x_in.cols();
  if (n < 2) throw EstimationError("boosted_stumps needs at least two training rows");
  // Small samples fall back to the largest leaf size that still allows a split.
  const auto leaf = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(min_leaf), n / 2));

  auto scale = Standardizer::from(x_in);
  const RowMatrix x = scale.apply(x_in);

  std::vector<std::vector<std::size_t>> order(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(n);
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), j) < x(static_cast<Eigen::Index>(b), j);
    });
  }

  const double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> resid(y.begin(), y.end());
  for (double& r : resid) r -= base;

  std::vector<Stump> stumps;
  stumps.reserve(static_cast<std::size_t>(rounds));
  for (int round = 0; round < rounds; ++round) {
    const double total = std::accumulate(resid.begin(), resid.end(), 0.0);
    double best_gain = -1.0;
    Stump best{-1, 0.0, 0.0, 0.0};
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& o = order[static_cast<std::size_t>(j)];
      double left_sum = 0.0;
      for (std::size_t r = 0; r + 1 < n; ++r) {
        left_sum += resid[o[r]];
        const double here = x(static_cast<Eigen::Index>(o[r]), j);
        const double next = x(static_cast<Eigen::Index>(o[r + 1]), j);
        if (!(here < next) || r + 1 < leaf || n - r - 1 < leaf) continue;
        const double nl = static_cast<double>(r + 1);
        const double nr = static_cast<double>(n - r - 1);
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (gain > best_gain) {
          best_gain = gain;
          best = {j, 0.5 * (here + next), left_sum / nl, right_sum / nr};
        }
      }
    }
    if (best.feature < 0) break;  // every feature constant
    for (std::size_t i = 0; i < n; ++i)
      resid[i] -= learning_rate *
                  (x(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? best.left : best.right);
    stumps.push_back(best);
  }

  FitOutput out;
  if (stumps.empty()) out.flags.push_back("boosting_no_split");
  out.predictor = std::make_shared<StumpEnsemble>(std::move(scale), base, learning_rate, std::move(stumps));
  return out;
}

}  // namespace mqiv::detail
