#include "confattr/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <string>

#include "confattr/error.hpp"
#include "confattr/rng.hpp"

namespace confattr {

namespace {

constexpr std::size_t kChunk = 4096;

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

// Evaluates masks through the game's batch interface in bounded chunks.
std::vector<double> evaluate(CoalitionGame& game, const std::vector<CoalitionMask>& masks) {
  std::vector<double> out;
  out.reserve(masks.size());
  for (std::size_t start = 0; start < masks.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, masks.size() - start);
    auto part = game.values(std::span<const CoalitionMask>(masks.data() + start, len));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<CoalitionMask> all_masks(std::size_t p) {
  std::vector<CoalitionMask> masks;
  const std::uint64_t total = std::uint64_t{1} << p;
  masks.reserve(total);
  for (std::uint64_t b = 0; b < total; ++b) masks.push_back(CoalitionMask::from_bits(p, b));
  return masks;
}

// Coalitions strictly between the anchors with their values.
struct Sample {
  std::vector<CoalitionMask> masks;
  std::vector<double> values;
  double v_empty = 0.0;
  double v_full = 0.0;
  std::size_t p = 0;
  bool exhaustive = false;
};

Sample collect(CoalitionGame& game, const EstimatorConfig& cfg, bool paired) {
  const std::size_t p = game.players();
  if (p == 0) throw Error(ErrorCode::InvalidConfig, "game has no players");
  Sample s;
  s.p = p;
  std::vector<CoalitionMask> plan;
  if (p < 63 && cfg.budget >= (std::uint64_t{1} << p)) {
    s.exhaustive = true;
    plan = all_masks(p);
    // Anchors first, matching the budgeted layout.
    std::swap(plan[1], plan.back());
  } else {
    if (cfg.budget < 2 * p + 2) {
      throw Error(ErrorCode::BudgetTooSmall, "budget " + std::to_string(cfg.budget) + " is below 2p + 2 = " +
                                                 std::to_string(2 * p + 2));
    }
    plan = sample_coalitions(p, cfg.budget, cfg.seed, paired);
  }
  const auto values = evaluate(game, plan);
  s.v_empty = values[0];
  s.v_full = values[1];
  s.masks.assign(plan.begin() + 2, plan.end());
  s.values.assign(values.begin() + 2, values.end());
  return s;
}

std::vector<std::size_t> stratum_counts(const Sample& s) {
  std::vector<std::size_t> counts(s.p + 1, 0);
  for (const auto& m : s.masks) ++counts[m.count()];
  return counts;
}

// Self-normalized MSR over the sampled middle coalitions. Within size s,
// the n_s draws are uniform, so weight 1/(s n_s) (resp. 1/((p-s) n_s))
// spreads each stratum's share evenly over the draws containing (resp.
// missing) the player.
Eigen::VectorXd msr_core(const Sample& s, const std::vector<double>& values, double v_empty, double v_full) {
  const std::size_t p = s.p;
  const auto counts = stratum_counts(s);
  Eigen::VectorXd in_num = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd in_den = in_num, out_num = in_num, out_den = in_num;
  double pooled_num = 0.0, pooled_den = 0.0;
  for (std::size_t t = 0; t < s.masks.size(); ++t) {
    const auto& m = s.masks[t];
    const std::size_t size = m.count();
    const double ns = static_cast<double>(counts[size]);
    const double a_in = 1.0 / (static_cast<double>(size) * ns);
    const double a_out = 1.0 / (static_cast<double>(p - size) * ns);
    const double v = values[t];
    pooled_num += v / ns;
    pooled_den += 1.0 / ns;
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (m.test(j)) {
        in_num[jj] += a_in * v;
        in_den[jj] += a_in;
      } else {
        out_num[jj] += a_out * v;
        out_den[jj] += a_out;
      }
    }
  }
  const double pooled = pooled_den > 0.0 ? pooled_num / pooled_den : 0.0;
  const double pd = static_cast<double>(p);
  Eigen::VectorXd phi(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    const double mean_in = in_den[j] > 0.0 ? in_num[j] / in_den[j] : pooled;
    const double mean_out = out_den[j] > 0.0 ? out_num[j] / out_den[j] : pooled;
    phi[j] = (v_full - v_empty) / pd + (pd - 1.0) / pd * (mean_in - mean_out);
  }
  return phi;
}

// Efficiency-constrained kernel-weighted least squares:
//   min sum_S w_S (v0 + z_S'phi - v_S)^2  s.t.  1'phi = v_full - v0.
Eigen::VectorXd constrained_wls(const Sample& s) {
  const std::size_t p = s.p;
  const auto pi = static_cast<Eigen::Index>(p);
  const auto counts = stratum_counts(s);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(pi, pi);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(pi);
  for (std::size_t t = 0; t < s.masks.size(); ++t) {
    const auto& m = s.masks[t];
    const std::size_t size = m.count();
    const double w = static_cast<double>(p - 1) /
                     (static_cast<double>(size) * static_cast<double>(p - size) * static_cast<double>(counts[size]));
    const double r = s.values[t] - s.v_empty;
    const auto idx = m.indices();
    for (auto j : idx) {
      const auto jj = static_cast<Eigen::Index>(j);
      b[jj] += w * r;
      for (auto k : idx) a(jj, static_cast<Eigen::Index>(k)) += w;
    }
  }
  const double delta = s.v_full - s.v_empty;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(pi);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const auto d = ldlt.vectorD().cwiseAbs();
  const double scale = std::max(d.maxCoeff(), 1e-300);
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * scale) {
    std::cerr << "warning: " << to_string(ErrorCode::SingularSystem)
              << ": kernel-weighted system is singular; adding ridge 1e-10\n";
    a.diagonal().array() += 1e-10;
    ldlt.compute(a);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "kernel-weighted system is singular");
  }
  const Eigen::VectorXd ainv_b = ldlt.solve(b);
  const Eigen::VectorXd ainv_1 = ldlt.solve(ones);
  const double lambda = (ones.dot(ainv_b) - delta) / ones.dot(ainv_1);
  return ainv_b - lambda * ainv_1;
}

Attribution finish(const Sample& s, Eigen::VectorXd phi, Method method, const EstimatorConfig& cfg) {
  Attribution out;
  out.phi = std::move(phi);
  out.base_value = s.v_empty;
  out.full_value = s.v_full;
  out.method = method;
  out.exact_fallback = s.exhaustive;
  out.budget_used = s.masks.size() + 2;
  out.seed = cfg.seed;
  out.efficiency_gap = out.phi.sum() - (s.v_full - s.v_empty);
  return out;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Exact: return "exact";
    case Method::MSR: return "msr";
    case Method::KernelSHAP: return "kernelshap";
    case Method::RegressionMSR: return "regression_msr";
  }
  return "exact";
}

Method method_from_string(std::string_view name) {
  for (auto m : {Method::Exact, Method::MSR, Method::KernelSHAP, Method::RegressionMSR}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

double shapley_weight(std::size_t p, std::size_t s) {
  return 1.0 / (static_cast<double>(p) * binomial(p - 1, s));
}

Eigen::VectorXd exact_shapley_from_table(const std::vector<double>& values, std::size_t p) {
  const std::uint64_t total = std::uint64_t{1} << p;
  if (values.size() != total) throw Error(ErrorCode::IncompleteTable, "value table must have 2^p entries");
  std::vector<double> w(p + 1, 0.0);
  for (std::size_t s = 0; s < p; ++s) w[s] = shapley_weight(p, s);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    const double ws = w[static_cast<std::size_t>(std::popcount(bits))];
    for (std::size_t j = 0; j < p; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      if (bits & bit) continue;
      phi[static_cast<Eigen::Index>(j)] += ws * (values[bits | bit] - values[bits]);
    }
  }
  return phi;
}

Attribution exact_shapley(CoalitionGame& game, const EstimatorConfig& cfg) {
  const std::size_t p = game.players();
  if (p == 0) throw Error(ErrorCode::InvalidConfig, "game has no players");
  if (p > cfg.max_exact_players || p > 62) {
    throw Error(ErrorCode::DimensionTooLarge, "exact enumeration needs 2^" + std::to_string(p) + " coalitions; limit is p <= " +
                                                  std::to_string(cfg.max_exact_players));
  }
  const auto masks = all_masks(p);
  const auto values = evaluate(game, masks);

  Attribution out;
  out.phi = exact_shapley_from_table(values, p);
  out.base_value = values.front();
  out.full_value = values.back();
  out.method = Method::Exact;
  out.budget_used = masks.size();
  out.seed = cfg.seed;
  out.efficiency_gap = out.phi.sum() - (out.full_value - out.base_value);

  if (cfg.local) {
    if (!game.has_local_values()) throw Error(ErrorCode::InvalidConfig, "game has no local values");
    std::vector<Eigen::VectorXd> local(masks.size());
    for (std::size_t b = 0; b < masks.size(); ++b) local[b] = game.local_values(masks[b]);
    const auto n = local.front().size();
    Eigen::MatrixXd lphi = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(p));
    for (std::uint64_t bits = 0; bits < masks.size(); ++bits) {
      const auto size = static_cast<std::size_t>(std::popcount(bits));
      if (size == p) continue;
      const double ws = shapley_weight(p, size);
      for (std::size_t j = 0; j < p; ++j) {
        const std::uint64_t bit = std::uint64_t{1} << j;
        if (bits & bit) continue;
        lphi.col(static_cast<Eigen::Index>(j)) += ws * (local[bits | bit] - local[bits]);
      }
    }
    out.local_phi = std::move(lphi);
  }
  return out;
}

std::vector<CoalitionMask> sample_coalitions(std::size_t p, std::size_t budget, std::uint64_t seed, bool paired) {
  std::vector<CoalitionMask> plan{CoalitionMask::empty(p), CoalitionMask::full(p)};
  if (p < 2) return plan;
  const double total_middle = p < 63 ? std::ldexp(1.0, static_cast<int>(p)) - 2.0 : 1e300;
  const std::size_t target = static_cast<std::size_t>(
      std::min(static_cast<double>(budget > 2 ? budget - 2 : 0), total_middle));

  std::vector<double> weight(p, 0.0), capacity(p, 0.0);
  std::vector<std::size_t> taken(p, 0);
  for (std::size_t s = 1; s < p; ++s) {
    weight[s] = 1.0 / (static_cast<double>(s) * static_cast<double>(p - s));
    capacity[s] = binomial(p, s);
  }

  RandomStream rng(seed, stream_id(paired ? "coalitions.paired" : "coalitions", p));
  std::set<CoalitionMask> seen;
  std::vector<std::size_t> perm(p);
  std::size_t added = 0;

  auto accept = [&](const CoalitionMask& m) {
    if (!seen.insert(m).second) return false;
    plan.push_back(m);
    ++taken[m.count()];
    ++added;
    return true;
  };

  while (added < target) {
    double mass = 0.0;
    for (std::size_t s = 1; s < p; ++s) {
      if (static_cast<double>(taken[s]) < capacity[s]) mass += weight[s];
    }
    if (mass <= 0.0) break;
    double u = rng.uniform() * mass;
    std::size_t size = 0;
    for (std::size_t s = 1; s < p; ++s) {
      if (static_cast<double>(taken[s]) >= capacity[s]) continue;
      size = s;
      if (u < weight[s]) break;
      u -= weight[s];
    }
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CoalitionMask m(p);
    for (std::size_t k = 0; k < size; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(p - k));
      std::swap(perm[k], perm[pick]);
      m.set(perm[k]);
    }
    if (!accept(m)) continue;
    if (paired && added < target) accept(m.complement());
  }
  return plan;
}

Attribution msr_estimate(CoalitionGame& game, const EstimatorConfig& cfg) {
  const Sample s = collect(game, cfg, false);
  return finish(s, msr_core(s, s.values, s.v_empty, s.v_full), Method::MSR, cfg);
}

Attribution kernelshap_estimate(CoalitionGame& game, const EstimatorConfig& cfg) {
  const Sample s = collect(game, cfg, true);
  return finish(s, constrained_wls(s), Method::KernelSHAP, cfg);
}

Attribution regression_msr_estimate(CoalitionGame& game, const EstimatorConfig& cfg) {
  const Sample s = collect(game, cfg, false);
  const Eigen::VectorXd c = constrained_wls(s);
  // The proxy matches both anchors, so the residual game vanishes there.
  std::vector<double> resid(s.values.size());
  for (std::size_t t = 0; t < resid.size(); ++t) {
    double proxy = s.v_empty;
    for (auto j : s.masks[t].indices()) proxy += c[static_cast<Eigen::Index>(j)];
    resid[t] = s.values[t] - proxy;
  }
  Eigen::VectorXd phi = c + msr_core(s, resid, 0.0, 0.0);
  const double gap = (s.v_full - s.v_empty) - phi.sum();
  phi.array() += gap / static_cast<double>(s.p);
  return finish(s, std::move(phi), Method::RegressionMSR, cfg);
}

Attribution estimate(CoalitionGame& game, const EstimatorConfig& cfg) {
  switch (cfg.method) {
    case Method::Exact: return exact_shapley(game, cfg);
    case Method::MSR: return msr_estimate(game, cfg);
    case Method::KernelSHAP: return kernelshap_estimate(game, cfg);
    case Method::RegressionMSR: return regression_msr_estimate(game, cfg);
  }
  return exact_shapley(game, cfg);
}

}  // namespace confattr
