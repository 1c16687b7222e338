#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confattr/mask.hpp"

namespace confattr {

enum class CovariateRole { Instrument, Confounder, EffectModifier, OutcomeOnly, Noise, Unknown };

std::string_view to_string(CovariateRole role);
CovariateRole role_from_string(std::string_view name);

/// Ground truth known only for generated data. Never read by the bias game.
struct GroundTruth {
  Eigen::VectorXd tau;         // unit-level CATE mu1 - mu0
  Eigen::VectorXd propensity;  // P(A = 1 | X = x_i)
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
};

/// Observational sample Z = (X, A, Y). Immutable once constructed; the
/// constructor rejects anything violating the invariants.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd a, Eigen::VectorXd y, std::vector<std::string> names,
          std::optional<std::vector<CovariateRole>> roles = std::nullopt,
          std::optional<GroundTruth> truth = std::nullopt);

  std::size_t n() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& a() const noexcept { return a_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::optional<std::vector<CovariateRole>>& roles() const noexcept { return roles_; }
  const std::optional<GroundTruth>& truth() const noexcept { return truth_; }

  bool treated(std::size_t i) const { return a_[static_cast<Eigen::Index>(i)] == 1.0; }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return n() - n_treated_; }
  /// Row indices of arm `arm` (0 or 1) in ascending order.
  std::vector<std::size_t> arm_rows(int arm) const;
  /// Indices of covariates labelled with `role`; empty when no roles.
  std::vector<std::size_t> indices_with_role(CovariateRole role) const;

  Dataset with_roles(std::vector<CovariateRole> roles) const;
  /// Keeps the listed covariates (ascending order is preserved as given).
  Dataset select_covariates(const std::vector<std::size_t>& keep) const;
  /// Keeps the listed rows in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd a_;
  Eigen::VectorXd y_;
  std::vector<std::string> names_;
  std::optional<std::vector<CovariateRole>> roles_;
  std::optional<GroundTruth> truth_;
  std::size_t n_treated_ = 0;
};

/// X_S: the columns of `mask` in ascending covariate order.
Eigen::MatrixXd subset_columns(const Eigen::MatrixXd& x, const CoalitionMask& mask);
Eigen::MatrixXd subset_columns(const Dataset& ds, const CoalitionMask& mask);

/// Per-column standardization to mean 0, sd 1 (population sd). Columns with
/// zero spread are only centered. `columns` empty means all columns.
Dataset standardize(const Dataset& ds, const std::vector<std::size_t>& columns = {});

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv_table(const std::filesystem::path& path);

enum class Imputation { None, Median };

/// Loads a dataset from a header-row CSV. Covariates are all columns other
/// than the treatment and outcome columns, in header order. With
/// Imputation::None any empty or NA cell is an error.
Dataset load_csv(const std::filesystem::path& path, std::string_view treatment_col,
                 std::string_view outcome_col, Imputation impute = Imputation::None);

/// Role sidecar: CSV with columns (name, role).
std::vector<CovariateRole> load_roles(const std::filesystem::path& path,
                                      const std::vector<std::string>& names);

void write_csv(const Dataset& ds, const std::filesystem::path& path,
               std::string_view treatment_col = "a", std::string_view outcome_col = "y");
void write_roles(const Dataset& ds, const std::filesystem::path& path);
/// Ground-truth sidecar with columns tau, propensity, mu0, mu1.
void write_truth(const Dataset& ds, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace confattr
