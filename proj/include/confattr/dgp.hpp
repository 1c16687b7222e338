#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "confattr/dataset.hpp"

namespace confattr {

/// Sum-of-squares benchmark with instrument (Z), confounder (C), effect
/// modifier (tau), outcome-only (O) and noise (N) blocks, in that column order.
struct CurthDgpSpec {
  std::size_t n_instruments = 1;
  std::size_t n_confounders = 1;
  std::size_t n_modifiers = 1;
  std::size_t n_outcome_only = 1;
  std::size_t n_noise = 0;
  double xi = 3.0;
  double gamma_z = 1.0;
  double sigma = 1.0;
  std::size_t n = 5000;
  std::uint64_t seed = 0;

  std::size_t p() const { return n_instruments + n_confounders + n_modifiers + n_outcome_only + n_noise; }
  void validate() const;

  static CurthDgpSpec four(std::size_t n, std::uint64_t seed);
  static CurthDgpSpec seventeen(std::size_t n, std::uint64_t seed);
  /// p covariates of which round(0.4 p) are confounders; the rest are split
  /// as evenly as possible over Z, tau, O, N (earlier blocks first).
  static CurthDgpSpec ablation(std::size_t p, std::size_t n, std::uint64_t seed);
};

struct SemiSynthSpec {
  std::vector<std::size_t> confounder_indices;
  double alpha0 = 0.0;
  std::vector<double> alpha;
  double beta0 = 0.0;
  std::vector<double> beta;
  double tau = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void validate(std::size_t p) const;

  /// Confounded parameterization over (age, karnof, symptom, str2, cd40).
  static SemiSynthSpec actg(std::uint64_t seed = 42);
  /// Same outcome model with randomized assignment (alpha = 0, alpha0 = 0).
  static SemiSynthSpec actg_randomized(std::uint64_t seed = 42);
};

void to_json(nlohmann::json& j, const CurthDgpSpec& s);
void from_json(const nlohmann::json& j, CurthDgpSpec& s);
void to_json(nlohmann::json& j, const SemiSynthSpec& s);
void from_json(const nlohmann::json& j, SemiSynthSpec& s);

Dataset generate_curth(const CurthDgpSpec& spec);

/// Two Bernoulli(1/2) covariates with a zero-effect outcome table.
Dataset generate_cancellation(std::size_t n, double sigma, std::uint64_t seed);
/// Noiseless cancellation sample with exact cell and arm proportions:
/// `per_cell` units per covariate cell (a positive multiple of 30).
Dataset cancellation_population(std::size_t per_cell);

/// Z, C, M, O standard normal; the prognostic term shared by both arms
/// cancels in the CATE.
Dataset generate_cancelling_confounder(std::size_t n, std::uint64_t seed);

/// X1 = U + e1, X2 = U + e2, X3 = U. Treatment depends on X1 only, both
/// outcome arms on X2 only.
Dataset generate_proxy_confounder(std::size_t n, double noise_sd, std::uint64_t seed,
                                  double treatment_coef = 2.0, double outcome_coef = 2.0);

/// Semi-synthetic assignment and outcome on a given covariate matrix.
Dataset generate_semisynth(const Eigen::MatrixXd& covariates, const SemiSynthSpec& spec,
                           std::vector<std::string> names = {});

struct CovariateTable {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
};

/// Synthetic stand-in for the 11 ACTG 175 baseline covariates (age, wtkg,
/// hemo, drugs, karnof, race, gender, symptom, str2, cd40, cd80) with
/// continuous columns standardized.
CovariateTable simulate_actg_like_covariates(std::size_t n, std::uint64_t seed);

double logistic(double t);

}  // namespace confattr
