#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "confattr/mask.hpp"

namespace confattr {

enum class BackendKind {
  /// ExactCellMean when every column has at most `max_cardinality` distinct
  /// values, otherwise Knn with k = ceil(sqrt(n_train)).
  Auto,
  ExactCellMean,
  Knn,
  PiecewiseConstantTree,
  /// Additive least-squares boosting with depth-one trees.
  BoostedStumps,
};

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

/// Hyperparameters of a regression backend. Fields irrelevant to `kind`
/// are ignored.
struct RegressionBackend {
  BackendKind kind = BackendKind::Auto;
  /// Knn neighbour count; 0 means ceil(sqrt(n_train)).
  std::size_t k = 0;
  std::size_t max_cardinality = 16;
  std::size_t max_depth = 6;
  /// Tree and boosting leaf size.
  std::size_t min_leaf = 20;
  std::size_t rounds = 1000;
  double learning_rate = 0.2;

  static RegressionBackend exact_cell_mean(std::size_t max_cardinality = 16) {
    RegressionBackend b;
    b.kind = BackendKind::ExactCellMean;
    b.max_cardinality = max_cardinality;
    return b;
  }
  static RegressionBackend knn(std::size_t k = 0) {
    RegressionBackend b;
    b.kind = BackendKind::Knn;
    b.k = k;
    return b;
  }
  static RegressionBackend tree(std::size_t max_depth, std::size_t min_leaf) {
    RegressionBackend b;
    b.kind = BackendKind::PiecewiseConstantTree;
    b.max_depth = max_depth;
    b.min_leaf = min_leaf;
    return b;
  }
  static RegressionBackend boosted_stumps(std::size_t rounds = 1000, double learning_rate = 0.2,
                                          std::size_t min_leaf = 20) {
    RegressionBackend b;
    b.kind = BackendKind::BoostedStumps;
    b.rounds = rounds;
    b.learning_rate = learning_rate;
    b.min_leaf = min_leaf;
    return b;
  }
};

namespace detail {
class ModelImpl;
}

/// Immutable trained regression. Copies share state.
class FittedModel {
 public:
  FittedModel(std::shared_ptr<const detail::ModelImpl> impl, std::optional<CoalitionMask> columns);

  /// Predictions for every row of `x_eval`; its width must match training.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const;

  std::size_t width() const noexcept;
  /// Backend that was actually fitted (Auto resolves to a concrete kind).
  BackendKind kind() const noexcept;
  /// Covariate mask this model was trained on, when known.
  const std::optional<CoalitionMask>& columns() const noexcept { return columns_; }

 private:
  std::shared_ptr<const detail::ModelImpl> impl_;
  std::optional<CoalitionMask> columns_;
};

/// Fits `backend` on (x, y). d = 0 yields the constant training mean.
FittedModel fit(const RegressionBackend& backend, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                std::optional<CoalitionMask> columns = std::nullopt);

/// Number of distinct values in each column of `x`, capped at `cap + 1`.
std::size_t distinct_count(const Eigen::Ref<const Eigen::VectorXd>& column, std::size_t cap);

namespace detail {

class ModelImpl {
 public:
  virtual ~ModelImpl() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x_eval) const = 0;
  virtual std::size_t width() const noexcept = 0;
  virtual BackendKind kind() const noexcept = 0;
};

std::shared_ptr<const ModelImpl> fit_cell_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               std::size_t max_cardinality);
std::shared_ptr<const ModelImpl> fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k);
std::shared_ptr<const ModelImpl> fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t max_depth,
                                          std::size_t min_leaf);
std::shared_ptr<const ModelImpl> fit_boosted_stumps(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                    std::size_t rounds, double learning_rate, std::size_t min_leaf);

}  // namespace detail

}  // namespace confattr
