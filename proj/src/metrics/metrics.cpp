#include "confattr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "confattr/bias_game.hpp"
#include "confattr/error.hpp"
#include "confattr/game.hpp"
#include "confattr/rng.hpp"

namespace confattr {

std::vector<std::size_t> rank_order(const Eigen::VectorXd& phi) {
  std::vector<std::size_t> order(static_cast<std::size_t>(phi.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(phi[static_cast<Eigen::Index>(a)]) > std::abs(phi[static_cast<Eigen::Index>(b)]);
  });
  return order;
}

double confounder_mass(const Eigen::VectorXd& phi, const std::vector<std::size_t>& confounders) {
  const double total = phi.cwiseAbs().sum();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalMass, "attributions are all zero");
  double mass = 0.0;
  for (auto j : std::set<std::size_t>(confounders.begin(), confounders.end())) {
    if (j >= static_cast<std::size_t>(phi.size())) throw Error(ErrorCode::WidthMismatch, "confounder index out of range");
    mass += std::abs(phi[static_cast<Eigen::Index>(j)]);
  }
  return mass / total;
}

double confounder_recovery(const Eigen::VectorXd& phi, const std::vector<std::size_t>& confounders) {
  const std::set<std::size_t> c(confounders.begin(), confounders.end());
  if (c.empty()) throw Error(ErrorCode::EmptyConfounderSet, "confounder set is empty");
  if (*c.rbegin() >= static_cast<std::size_t>(phi.size())) {
    throw Error(ErrorCode::WidthMismatch, "confounder index out of range");
  }
  const auto order = rank_order(phi);
  std::size_t hit = 0;
  for (std::size_t r = 0; r < c.size(); ++r) hit += c.contains(order[r]);
  return static_cast<double>(hit) / static_cast<double>(c.size());
}

double pehe(const Eigen::VectorXd& tau_hat, const Eigen::VectorXd& tau_true) {
  if (tau_hat.size() != tau_true.size()) throw Error(ErrorCode::LengthMismatch, "effect vectors differ in length");
  if (tau_hat.size() == 0) throw Error(ErrorCode::LengthMismatch, "effect vectors are empty");
  return std::sqrt((tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size()));
}

RankStabilityTable rank_stability(const std::vector<Eigen::VectorXd>& runs) {
  if (runs.size() < 2) throw Error(ErrorCode::MissingRuns, "rank stability needs at least two runs");
  const auto p = static_cast<std::size_t>(runs.front().size());
  RankStabilityTable t;
  t.counts.assign(p, std::vector<std::size_t>(p, 0));
  t.n_runs = runs.size();
  for (const auto& phi : runs) {
    if (static_cast<std::size_t>(phi.size()) != p) throw Error(ErrorCode::InconsistentWidth, "runs differ in width");
    const auto order = rank_order(phi);
    for (std::size_t r = 0; r < p; ++r) ++t.counts[order[r]][r];
  }
  return t;
}

std::string_view to_string(DropStrategy::Kind kind) {
  switch (kind) {
    case DropStrategy::Kind::TopK: return "top_k";
    case DropStrategy::Kind::Random: return "random";
    case DropStrategy::Kind::BottomK: return "bottom_k";
  }
  return "top_k";
}

std::vector<std::size_t> dropped_covariates(const Eigen::VectorXd& phi, std::size_t k, const DropStrategy& strategy) {
  const auto p = static_cast<std::size_t>(phi.size());
  if (k >= p) throw Error(ErrorCode::InvalidConfig, "k must be below p = " + std::to_string(p));
  const auto order = rank_order(phi);
  std::vector<std::size_t> out;
  switch (strategy.kind) {
    case DropStrategy::Kind::TopK: out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)); break;
    case DropStrategy::Kind::BottomK: out.assign(order.end() - static_cast<std::ptrdiff_t>(k), order.end()); break;
    case DropStrategy::Kind::Random: {
      RandomStream rng(strategy.seed, stream_id("drop.random", k));
      std::vector<std::size_t> idx(p);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t t = 0; t < k; ++t) std::swap(idx[t], idx[t + static_cast<std::size_t>(rng.below(p - t))]);
      out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DropRow> feature_drop_pehe(const Dataset& ds, const Eigen::VectorXd& phi,
                                       const std::vector<std::size_t>& k_values, const DropStrategy& strategy,
                                       const LearnerConfig& learner) {
  if (!ds.truth()) throw Error(ErrorCode::NoGroundTruth, "feature-drop PEHE needs ground-truth effects");
  if (static_cast<std::size_t>(phi.size()) != ds.p()) throw Error(ErrorCode::WidthMismatch, "phi width differs from p");
  if (!(learner.test_fraction > 0.0 && learner.test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.n();
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  RandomStream rng(learner.split_seed, stream_id("drop.split"));
  for (std::size_t t = 0; t + 1 < n; ++t) std::swap(perm[t], perm[t + static_cast<std::size_t>(rng.below(n - t))]);
  const auto n_test = static_cast<std::size_t>(std::ceil(learner.test_fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Eigen::Index> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());

  const Eigen::VectorXd tau_test = ds.truth()->tau(test);
  std::vector<DropRow> rows(k_values.size());
  parallel_for(k_values.size(), configured_threads(), [&](std::size_t t) {
    const std::size_t k = k_values[t];
    const auto drop = dropped_covariates(phi, k, strategy);
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < ds.p(); ++j) {
      if (!std::binary_search(drop.begin(), drop.end(), j)) keep.push_back(static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd x_train = ds.x()(train, keep);
    const Eigen::MatrixXd x_test = ds.x()(test, keep);
    const Eigen::VectorXd tau_hat = arm_contrast(learner.backend, x_train, ds.a()(train), ds.y()(train), x_test);
    rows[t] = {k, strategy, pehe(tau_hat, tau_test)};
  });
  return rows;
}

}  // namespace confattr
