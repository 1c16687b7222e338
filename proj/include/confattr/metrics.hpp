#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "confattr/dataset.hpp"
#include "confattr/regression.hpp"

namespace confattr {

/// Covariate indices by descending |phi|; ties go to the lower index.
std::vector<std::size_t> rank_order(const Eigen::VectorXd& phi);

/// Share of total absolute attribution landing on `confounders`.
double confounder_mass(const Eigen::VectorXd& phi, const std::vector<std::size_t>& confounders);
/// Fraction of `confounders` among the top |confounders| by |phi|.
double confounder_recovery(const Eigen::VectorXd& phi, const std::vector<std::size_t>& confounders);
/// Root mean squared difference of unit-level effects.
double pehe(const Eigen::VectorXd& tau_hat, const Eigen::VectorXd& tau_true);

struct RankStabilityTable {
  /// counts[j][r]: runs placing covariate j at rank r (0 = largest |phi|).
  std::vector<std::vector<std::size_t>> counts;
  std::size_t n_runs = 0;
};

RankStabilityTable rank_stability(const std::vector<Eigen::VectorXd>& runs);

struct DropStrategy {
  enum class Kind { TopK, Random, BottomK };
  Kind kind = Kind::TopK;
  std::uint64_t seed = 0;  // Random only

  static DropStrategy top() { return {Kind::TopK, 0}; }
  static DropStrategy random(std::uint64_t seed) { return {Kind::Random, seed}; }
  static DropStrategy bottom() { return {Kind::BottomK, 0}; }
};

std::string_view to_string(DropStrategy::Kind kind);

struct LearnerConfig {
  RegressionBackend backend = RegressionBackend::knn();
  double test_fraction = 0.3;
  std::uint64_t split_seed = 0;
};

struct DropRow {
  std::size_t k = 0;
  DropStrategy strategy;
  double pehe = 0.0;
};

/// Covariates removed by `strategy` for a given k.
std::vector<std::size_t> dropped_covariates(const Eigen::VectorXd& phi, std::size_t k, const DropStrategy& strategy);

/// For each k: drop covariates, refit the per-arm plug-in CATE on the
/// training split and score PEHE on the held-out split.
std::vector<DropRow> feature_drop_pehe(const Dataset& ds, const Eigen::VectorXd& phi,
                                       const std::vector<std::size_t>& k_values, const DropStrategy& strategy,
                                       const LearnerConfig& learner = {});

}  // namespace confattr
