#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "confattr/game.hpp"
#include "confattr/mask.hpp"

namespace confattr {

enum class Method { Exact, MSR, KernelSHAP, RegressionMSR };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct EstimatorConfig {
  Method method = Method::Exact;
  /// Distinct coalitions the estimator may query, anchors included.
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  /// Exact enumeration refuses larger p.
  std::size_t max_exact_players = 25;
  /// Per-unit attributions; exact mode only, requires local game values.
  bool local = false;
};

struct Attribution {
  Eigen::VectorXd phi;
  std::optional<Eigen::MatrixXd> local_phi;  // n x p
  double base_value = 0.0;                   // nu(empty)
  double full_value = 0.0;                   // nu([p])
  Method method = Method::Exact;
  /// Budgeted method run on the full enumeration because B >= 2^p.
  bool exact_fallback = false;
  /// Distinct coalitions queried, including both anchors.
  std::size_t budget_used = 0;
  std::uint64_t seed = 0;
  /// sum(phi) - (nu([p]) - nu(empty)).
  double efficiency_gap = 0.0;
};

/// Shapley weight 1 / (p * C(p-1, s)) of a coalition of size s not
/// containing the player.
double shapley_weight(std::size_t p, std::size_t s);

/// Exact Shapley values by full enumeration of all 2^p coalitions.
Attribution exact_shapley(CoalitionGame& game, const EstimatorConfig& cfg = {});
/// Subset-sum form over a complete value table indexed by mask bits.
Eigen::VectorXd exact_shapley_from_table(const std::vector<double>& values, std::size_t p);

/// Maximum-sample-reuse Monte Carlo estimate.
Attribution msr_estimate(CoalitionGame& game, const EstimatorConfig& cfg);
/// Constrained weighted least squares with Shapley kernel weights and paired
/// complement sampling.
Attribution kernelshap_estimate(CoalitionGame& game, const EstimatorConfig& cfg);
/// Additive proxy fit plus MSR correction of the residual game.
Attribution regression_msr_estimate(CoalitionGame& game, const EstimatorConfig& cfg);

/// Dispatches on cfg.method.
Attribution estimate(CoalitionGame& game, const EstimatorConfig& cfg);

/// Budgeted sampling plan. Coalitions are distinct; the first two are the
/// anchors empty and full. With `paired`, every sampled coalition is followed
/// by its complement while budget remains.
std::vector<CoalitionMask> sample_coalitions(std::size_t p, std::size_t budget, std::uint64_t seed, bool paired);

}  // namespace confattr
