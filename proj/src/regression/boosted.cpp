#include <algorithm>
#include <numeric>
#include <vector>

#include "confattr/regression.hpp"

namespace confattr::detail {

namespace {

struct Stump {
  int feature;
  double threshold;
  double left;
  double right;
};

// Least-squares gradient boosting with depth-one trees: an additive model
// sum_j f_j(x_j) built by shrunken single-split updates.
class BoostedStumpsModel final : public ModelImpl {
 public:
  BoostedStumpsModel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t rounds, double learning_rate,
                     std::size_t min_leaf)
      : width_(static_cast<std::size_t>(x.cols())) {
    const auto n = static_cast<std::size_t>(x.rows());
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) total += y[i];
    base_ = total / static_cast<double>(n);
    if (width_ == 0 || n < 2 * min_leaf) return;

    std::vector<std::vector<Eigen::Index>> order(width_);
    for (std::size_t f = 0; f < width_; ++f) {
      const auto fi = static_cast<Eigen::Index>(f);
      order[f].resize(n);
      std::iota(order[f].begin(), order[f].end(), Eigen::Index{0});
      std::sort(order[f].begin(), order[f].end(), [&](Eigen::Index a, Eigen::Index b) {
        const double xa = x(a, fi), xb = x(b, fi);
        return xa < xb || (xa == xb && a < b);
      });
    }

    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), base_);
    Eigen::VectorXd resid(y.size());
    const double nd = static_cast<double>(n);
    for (std::size_t round = 0; round < rounds; ++round) {
      resid = y - fitted;
      double rtotal = 0.0;
      for (Eigen::Index i = 0; i < resid.size(); ++i) rtotal += resid[i];
      const double parent = rtotal * rtotal / nd;

      double best_gain = 0.0;
      Stump best{-1, 0.0, 0.0, 0.0};
      for (std::size_t f = 0; f < width_; ++f) {
        const auto fi = static_cast<Eigen::Index>(f);
        const auto& ord = order[f];
        double left_sum = 0.0;
        for (std::size_t t = 1; t < n; ++t) {
          left_sum += resid[ord[t - 1]];
          if (t < min_leaf || n - t < min_leaf) continue;
          const double lo = x(ord[t - 1], fi), hi = x(ord[t], fi);
          if (!(lo < hi)) continue;
          const double nl = static_cast<double>(t), nr = nd - nl;
          const double right_sum = rtotal - left_sum;
          const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
          if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
            best_gain = gain;
            best = {static_cast<int>(f), lo + 0.5 * (hi - lo), left_sum / nl, right_sum / nr};
          }
        }
      }
      if (best.feature < 0) break;
      best.left *= learning_rate;
      best.right *= learning_rate;
      stumps_.push_back(best);
      const auto col = x.col(best.feature);
      for (Eigen::Index i = 0; i < fitted.size(); ++i) fitted[i] += col[i] <= best.threshold ? best.left : best.right;
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x_eval.rows(), base_);
    for (const auto& s : stumps_) {
      const auto col = x_eval.col(s.feature);
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += col[i] <= s.threshold ? s.left : s.right;
    }
    return out;
  }

  std::size_t width() const noexcept override { return width_; }
  BackendKind kind() const noexcept override { return BackendKind::BoostedStumps; }

 private:
  std::size_t width_;
  double base_ = 0.0;
  std::vector<Stump> stumps_;
};

}  // namespace

std::shared_ptr<const ModelImpl> fit_boosted_stumps(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                    std::size_t rounds, double learning_rate, std::size_t min_leaf) {
  return std::make_shared<BoostedStumpsModel>(x, y, rounds, learning_rate, min_leaf);
}

}  // namespace confattr::detail
