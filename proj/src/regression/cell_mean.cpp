#include <map>
#include <string>
#include <vector>

#include "confattr/error.hpp"
#include "confattr/regression.hpp"

namespace confattr::detail {

namespace {

// Per-cell training means keyed by the exact covariate tuple. Cells never
// seen in training fall back to the global training mean.
class CellMeanModel final : public ModelImpl {
 public:
  CellMeanModel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) : width_(static_cast<std::size_t>(x.cols())) {
    struct Acc {
      double sum = 0.0;
      std::size_t count = 0;
    };
    std::map<std::vector<double>, Acc> acc;
    double total = 0.0;
    std::vector<double> key(width_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (std::size_t c = 0; c < width_; ++c) key[c] = x(i, static_cast<Eigen::Index>(c));
      auto& a = acc[key];
      a.sum += y[i];
      ++a.count;
      total += y[i];
    }
    global_mean_ = total / static_cast<double>(y.size());
    for (auto& [k, a] : acc) cells_.emplace(k, a.sum / static_cast<double>(a.count));
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const override {
    Eigen::VectorXd out(x_eval.rows());
    std::vector<double> key(width_);
    for (Eigen::Index i = 0; i < x_eval.rows(); ++i) {
      for (std::size_t c = 0; c < width_; ++c) key[c] = x_eval(i, static_cast<Eigen::Index>(c));
      auto it = cells_.find(key);
      out[i] = it == cells_.end() ? global_mean_ : it->second;
    }
    return out;
  }

  std::size_t width() const noexcept override { return width_; }
  BackendKind kind() const noexcept override { return BackendKind::ExactCellMean; }

 private:
  std::size_t width_;
  double global_mean_ = 0.0;
  std::map<std::vector<double>, double> cells_;
};

}  // namespace

std::shared_ptr<const ModelImpl> fit_cell_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               std::size_t max_cardinality) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const std::size_t distinct = distinct_count(x.col(c), max_cardinality);
    if (distinct > max_cardinality) {
      throw Error(ErrorCode::CellCardinalityExceeded,
                  "column " + std::to_string(c) + " has more than " + std::to_string(max_cardinality) + " distinct values");
    }
  }
  return std::make_shared<CellMeanModel>(x, y);
}

}  // namespace confattr::detail
