#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string_view>
#include <vector>

#include "confattr/dataset.hpp"
#include "confattr/game.hpp"
#include "confattr/mask.hpp"
#include "confattr/regression.hpp"

namespace confattr {

/// How the residual bias enters the coalition value.
///   Signed:   nu(S) = -mean(b_S)      nu_x(S) = -b_S(x)
///   Absolute: nu(S) = -|mean(b_S)|    nu_x(S) = -|b_S(x)|
///   Squared:  nu(S) = -mean(b_S)^2    nu_x(S) = -b_S(x)^2
enum class ValueMode { Signed, Absolute, Squared };

std::string_view to_string(ValueMode mode);
ValueMode value_mode_from_string(std::string_view name);

/// Unit-level plug-in CATE from the full outcome model and its mean.
struct PseudoOutcomes {
  Eigen::VectorXd tau_hat;
  double tau_bar = 0.0;
};

struct CoalitionValue {
  double global_value = 0.0;
  Eigen::VectorXd delta_s;
  std::optional<Eigen::VectorXd> g_s;
  std::optional<Eigen::VectorXd> local_values;
};

struct CoalitionLogRecord {
  CoalitionMask mask;
  double global_value = 0.0;
  std::size_t n_cache_hits = 0;
};

struct GameOptions {
  ValueMode value_mode = ValueMode::Signed;
  /// 0 or 1: fit and evaluate on the full sample. K >= 2: unit i is
  /// predicted by models trained without fold i mod K.
  std::size_t crossfit_folds = 0;
  /// Workers for batch evaluation; 0 reads THREADS.
  std::size_t threads = 0;
};

/// The residual-confounding-bias game over covariate coalitions.
///
/// Construction fits per-arm outcome models on all covariates and stores the
/// pseudo-outcomes. Each coalition is evaluated at most once; the counter
/// starts at 1 for that initial fit and grows by one per distinct coalition.
class BiasGame final : public CoalitionGame {
 public:
  BiasGame(Dataset ds, RegressionBackend backend, GameOptions options = {});

  BiasGame(const BiasGame&) = delete;
  BiasGame& operator=(const BiasGame&) = delete;

  const Dataset& dataset() const noexcept { return ds_; }
  const RegressionBackend& backend() const noexcept { return backend_; }
  const GameOptions& options() const noexcept { return options_; }
  const PseudoOutcomes& pseudo() const noexcept { return pseudo_; }

  /// delta_S per unit: treated minus untreated fit on X_S.
  Eigen::VectorXd observational_contrast(const CoalitionMask& mask);
  /// g_S per unit: pseudo-outcomes regressed on X_S.
  Eigen::VectorXd cate_projection(const CoalitionMask& mask);
  /// Signed global value -(mean(delta_S) - tau_bar), before the value mode.
  double global_value(const CoalitionMask& mask);
  /// Full record for `mask`, including local values (fits g_S if needed).
  CoalitionValue coalition_value(const CoalitionMask& mask);

  // CoalitionGame
  std::size_t players() const override { return ds_.p(); }
  double value(const CoalitionMask& mask) override;
  std::vector<double> values(std::span<const CoalitionMask> masks) override;
  bool has_local_values() const override { return true; }
  Eigen::VectorXd local_values(const CoalitionMask& mask) override;

  /// 1 + number of distinct coalitions evaluated.
  std::size_t eval_count() const noexcept { return eval_count_.load(); }
  std::size_t cache_size() const;
  std::size_t cache_hits() const noexcept { return total_hits_.load(); }

  /// One record per evaluated mask in canonical mask order.
  std::vector<CoalitionLogRecord> log() const;
  void write_log(const std::filesystem::path& path) const;

 private:
  struct Entry {
    double global = 0.0;
    Eigen::VectorXd delta;
    std::shared_ptr<const Eigen::VectorXd> g;
    std::atomic<std::size_t> hits{0};
  };

  void check_width(const CoalitionMask& mask) const;
  Entry& ensure(const CoalitionMask& mask);
  Entry* find(const CoalitionMask& mask) const;
  const Eigen::VectorXd& ensure_projection(Entry& entry, const CoalitionMask& mask);
  Eigen::VectorXd compute_contrast(const CoalitionMask& mask) const;
  Eigen::VectorXd compute_projection(const CoalitionMask& mask) const;
  double signed_value(const Eigen::VectorXd& delta) const;
  double apply_mode(double signed_global) const;

  Dataset ds_;
  RegressionBackend backend_;
  GameOptions options_;
  PseudoOutcomes pseudo_;

  mutable std::shared_mutex mutex_;
  std::map<CoalitionMask, std::unique_ptr<Entry>> cache_;
  std::atomic<std::size_t> eval_count_{1};
  std::atomic<std::size_t> total_hits_{0};
};

std::unique_ptr<BiasGame> build_game(Dataset ds, RegressionBackend backend, GameOptions options = {});

/// Per-arm plug-in contrast: fits y on x_train separately within each
/// treatment arm and returns m1(x) - m0(x) at every row of x_eval.
Eigen::VectorXd arm_contrast(const RegressionBackend& backend, const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& a_train, const Eigen::VectorXd& y_train,
                             const Eigen::MatrixXd& x_eval);

}  // namespace confattr
