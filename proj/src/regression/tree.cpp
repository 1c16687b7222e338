#include <algorithm>
#include <numeric>
#include <vector>

#include "confattr/regression.hpp"

namespace confattr::detail {

namespace {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

// Greedy least-squares regression tree. Splits are placed midway between
// distinct adjacent values; ties in gain keep the lowest (feature, threshold).
class TreeModel final : public ModelImpl {
 public:
  TreeModel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t max_depth, std::size_t min_leaf)
      : width_(static_cast<std::size_t>(x.cols())), max_depth_(max_depth), min_leaf_(min_leaf) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    build(x, y, rows, 0);
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const override {
    Eigen::VectorXd out(x_eval.rows());
    for (Eigen::Index i = 0; i < x_eval.rows(); ++i) {
      int node = 0;
      while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
        const Node& nd = nodes_[static_cast<std::size_t>(node)];
        node = x_eval(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      out[i] = nodes_[static_cast<std::size_t>(node)].value;
    }
    return out;
  }

  std::size_t width() const noexcept override { return width_; }
  BackendKind kind() const noexcept override { return BackendKind::PiecewiseConstantTree; }

 private:
  int build(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<Eigen::Index>& rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double total = 0.0;
    for (auto r : rows) total += y[r];
    const double n = static_cast<double>(rows.size());
    nodes_.back().value = total / n;

    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_ || width_ == 0) return id;

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    const double parent_score = total * total / n;
    std::vector<Eigen::Index> order(rows);
    for (std::size_t f = 0; f < width_; ++f) {
      const auto fi = static_cast<Eigen::Index>(f);
      order = rows;
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double xa = x(a, fi), xb = x(b, fi);
        return xa < xb || (xa == xb && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t t = 1; t < order.size(); ++t) {
        left_sum += y[order[t - 1]];
        if (t < min_leaf_ || order.size() - t < min_leaf_) continue;
        const double lo = x(order[t - 1], fi), hi = x(order[t], fi);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(t), nr = n - nl;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_score;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-12) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = build(x, y, left, depth + 1);
    const int r = build(x, y, right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::size_t width_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::vector<Node> nodes_;
};

}  // namespace

std::shared_ptr<const ModelImpl> fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t max_depth,
                                          std::size_t min_leaf) {
  return std::make_shared<TreeModel>(x, y, max_depth, min_leaf);
}

}  // namespace confattr::detail
