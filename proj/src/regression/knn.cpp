#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "confattr/kernels.hpp"
#include "confattr/regression.hpp"

namespace confattr::detail {

namespace {

// k-nearest-neighbour mean under Euclidean distance on columns standardized
// with the training statistics. Every training point tied with the k-th
// distance is included, so the neighbour set does not depend on row order.
class KnnModel final : public ModelImpl {
 public:
  KnnModel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k)
      : width_(static_cast<std::size_t>(x.cols())),
        n_train_(static_cast<std::size_t>(x.rows())),
        k_(std::min(k, static_cast<std::size_t>(x.rows()))),
        targets_(y.data(), y.data() + y.size()),
        shift_(width_),
        scale_(width_),
        columns_(width_ * n_train_) {
    const double n = static_cast<double>(n_train_);
    for (std::size_t c = 0; c < width_; ++c) {
      const auto col = x.col(static_cast<Eigen::Index>(c));
      double sum = 0.0;
      for (Eigen::Index i = 0; i < col.size(); ++i) sum += col[i];
      const double mean = sum / n;
      double ss = 0.0;
      for (Eigen::Index i = 0; i < col.size(); ++i) ss += (col[i] - mean) * (col[i] - mean);
      const double sd = std::sqrt(ss / n);
      shift_[c] = mean;
      scale_[c] = sd > 0.0 ? 1.0 / sd : 1.0;
      kernels::affine(std::span<const double>(col.data(), n_train_), shift_[c], scale_[c],
                      std::span<double>(columns_.data() + c * n_train_, n_train_));
    }
    double total = 0.0;
    for (double t : targets_) total += t;
    global_mean_ = total / n;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const override {
    const auto m = x_eval.rows();
    Eigen::VectorXd out(m);
    if (width_ == 0 || k_ >= n_train_) {
      out.setConstant(global_mean_);
      return out;
    }
    // Standardize queries column by column with the training statistics.
    Eigen::MatrixXd q(m, static_cast<Eigen::Index>(width_));
    for (std::size_t c = 0; c < width_; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      kernels::affine(std::span<const double>(x_eval.col(ci).data(), static_cast<std::size_t>(m)), shift_[c], scale_[c],
                      std::span<double>(q.col(ci).data(), static_cast<std::size_t>(m)));
    }
    std::vector<double> dist(n_train_);
    std::vector<double> scratch(n_train_);
    for (Eigen::Index i = 0; i < m; ++i) {
      std::fill(dist.begin(), dist.end(), 0.0);
      for (std::size_t c = 0; c < width_; ++c) {
        kernels::accumulate_squared_diff(std::span<const double>(columns_.data() + c * n_train_, n_train_),
                                         q(i, static_cast<Eigen::Index>(c)), dist);
      }
      std::copy(dist.begin(), dist.end(), scratch.begin());
      auto kth = scratch.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
      std::nth_element(scratch.begin(), kth, scratch.end());
      const double radius = *kth;
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t t = 0; t < n_train_; ++t) {
        if (dist[t] <= radius) {
          sum += targets_[t];
          ++count;
        }
      }
      out[i] = sum / static_cast<double>(count);
    }
    return out;
  }

  std::size_t width() const noexcept override { return width_; }
  BackendKind kind() const noexcept override { return BackendKind::Knn; }

 private:
  std::size_t width_;
  std::size_t n_train_;
  std::size_t k_;
  std::vector<double> targets_;
  std::vector<double> shift_;
  std::vector<double> scale_;
  std::vector<double> columns_;  // standardized training data, column-major
  double global_mean_ = 0.0;
};

}  // namespace

std::shared_ptr<const ModelImpl> fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k) {
  return std::make_shared<KnnModel>(x, y, k);
}

}  // namespace confattr::detail
