#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "confattr/error.hpp"
#include "confattr/regression.hpp"

namespace confattr {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Auto: return "auto";
    case BackendKind::ExactCellMean: return "exact_cell_mean";
    case BackendKind::Knn: return "knn";
    case BackendKind::PiecewiseConstantTree: return "tree";
    case BackendKind::BoostedStumps: return "boosted_stumps";
  }
  return "auto";
}

BackendKind backend_kind_from_string(std::string_view name) {
  for (auto k : {BackendKind::Auto, BackendKind::ExactCellMean, BackendKind::Knn, BackendKind::PiecewiseConstantTree,
                 BackendKind::BoostedStumps}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown backend '" + std::string(name) + "'");
}

FittedModel::FittedModel(std::shared_ptr<const detail::ModelImpl> impl, std::optional<CoalitionMask> columns)
    : impl_(std::move(impl)), columns_(std::move(columns)) {}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& x_eval) const {
  if (static_cast<std::size_t>(x_eval.cols()) != impl_->width()) {
    throw Error(ErrorCode::WidthMismatch, "model trained on " + std::to_string(impl_->width()) +
                                              " columns, queried with " + std::to_string(x_eval.cols()));
  }
  return impl_->predict(x_eval);
}

std::size_t FittedModel::width() const noexcept { return impl_->width(); }

BackendKind FittedModel::kind() const noexcept { return impl_->kind(); }

std::size_t distinct_count(const Eigen::Ref<const Eigen::VectorXd>& column, std::size_t cap) {
  std::set<double> seen;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    seen.insert(column[i]);
    if (seen.size() > cap) break;
  }
  return seen.size();
}

FittedModel fit(const RegressionBackend& backend, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                std::optional<CoalitionMask> columns) {
  if (x.rows() == 0 || y.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "cannot fit on zero rows");
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "x rows differ from y length");
  if (columns && columns->count() != static_cast<std::size_t>(x.cols())) {
    throw Error(ErrorCode::WidthMismatch, "column mask popcount differs from x width");
  }

  BackendKind kind = backend.kind;
  if (kind == BackendKind::Auto) {
    kind = BackendKind::ExactCellMean;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (distinct_count(x.col(c), backend.max_cardinality) > backend.max_cardinality) {
        kind = BackendKind::Knn;
        break;
      }
    }
  }

  std::shared_ptr<const detail::ModelImpl> impl;
  switch (kind) {
    case BackendKind::ExactCellMean:
      impl = detail::fit_cell_mean(x, y, backend.max_cardinality);
      break;
    case BackendKind::Knn: {
      std::size_t k = backend.k;
      if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.rows()))));
      impl = detail::fit_knn(x, y, std::max<std::size_t>(1, k));
      break;
    }
    case BackendKind::PiecewiseConstantTree:
      impl = detail::fit_tree(x, y, backend.max_depth, std::max<std::size_t>(1, backend.min_leaf));
      break;
    case BackendKind::BoostedStumps:
      impl = detail::fit_boosted_stumps(x, y, backend.rounds, backend.learning_rate,
                                        std::max<std::size_t>(1, backend.min_leaf));
      break;
    case BackendKind::Auto:
      break;
  }
  return FittedModel(std::move(impl), std::move(columns));
}

}  // namespace confattr
