#include "confattr/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confattr/error.hpp"
#include "confattr/rng.hpp"

namespace confattr {

namespace {

Eigen::VectorXd normals(std::uint64_t seed, std::string_view name, std::uint64_t index, std::size_t n) {
  RandomStream rng(seed, stream_id(name, index));
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (auto& v : out) v = rng.normal();
  return out;
}

Eigen::VectorXd uniforms(std::uint64_t seed, std::string_view name, std::uint64_t index, std::size_t n) {
  RandomStream rng(seed, stream_id(name, index));
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (auto& v : out) v = rng.uniform();
  return out;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return v[n / 2 - 1] + 0.5 * (v[n / 2] - v[n / 2 - 1]);
}

std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, field + ": " + why);
}

}  // namespace

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void CurthDgpSpec::validate() const {
  require(n >= 2, "n", "must be at least 2");
  require(p() >= 1, "n_confounders", "at least one covariate is required");
  require(n_confounders >= 1 || xi == 0.0, "n_confounders", "must be at least 1 when xi != 0");
  require(std::isfinite(xi), "xi", "must be finite");
  require(std::isfinite(gamma_z), "gamma_z", "must be finite");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma", "must be finite and >= 0");
}

CurthDgpSpec CurthDgpSpec::four(std::size_t n, std::uint64_t seed) {
  CurthDgpSpec s;
  s.n = n;
  s.seed = seed;
  return s;
}

CurthDgpSpec CurthDgpSpec::seventeen(std::size_t n, std::uint64_t seed) {
  CurthDgpSpec s;
  s.n_instruments = 3;
  s.n_confounders = 5;
  s.n_modifiers = 3;
  s.n_outcome_only = 4;
  s.n_noise = 2;
  s.n = n;
  s.seed = seed;
  return s;
}

CurthDgpSpec CurthDgpSpec::ablation(std::size_t p, std::size_t n, std::uint64_t seed) {
  require(p >= 5, "p", "ablation designs need at least 5 covariates");
  CurthDgpSpec s;
  s.n = n;
  s.seed = seed;
  s.n_confounders = static_cast<std::size_t>(std::lround(0.4 * static_cast<double>(p)));
  const std::size_t rest = p - s.n_confounders;
  std::size_t blocks[4] = {rest / 4, rest / 4, rest / 4, rest / 4};
  for (std::size_t k = 0; k < rest % 4; ++k) ++blocks[k];
  s.n_instruments = blocks[0];
  s.n_modifiers = blocks[1];
  s.n_outcome_only = blocks[2];
  s.n_noise = blocks[3];
  return s;
}

void SemiSynthSpec::validate(std::size_t p) const {
  require(alpha.size() == confounder_indices.size(), "alpha", "length must equal the number of confounders");
  require(beta.size() == confounder_indices.size(), "beta", "length must equal the number of confounders");
  for (auto j : confounder_indices) require(j < p, "confounder_indices", "index out of range");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma", "must be finite and >= 0");
}

SemiSynthSpec SemiSynthSpec::actg(std::uint64_t seed) {
  SemiSynthSpec s;
  s.confounder_indices = {0, 4, 7, 8, 9};
  s.alpha0 = -0.2;
  s.alpha = {0.2, -0.8, 0.9, 0.5, -0.9};
  s.beta0 = 0.0;
  s.beta = {0.1, -0.5, 0.5, 0.25, -0.55};
  s.tau = 0.45;
  s.sigma = 0.35;
  s.seed = seed;
  return s;
}

SemiSynthSpec SemiSynthSpec::actg_randomized(std::uint64_t seed) {
  SemiSynthSpec s = actg(seed);
  s.alpha0 = 0.0;
  std::fill(s.alpha.begin(), s.alpha.end(), 0.0);
  return s;
}

void to_json(nlohmann::json& j, const CurthDgpSpec& s) {
  j = nlohmann::json{{"n_instruments", s.n_instruments}, {"n_confounders", s.n_confounders},
                     {"n_modifiers", s.n_modifiers},     {"n_outcome_only", s.n_outcome_only},
                     {"n_noise", s.n_noise},             {"xi", s.xi},
                     {"gamma_z", s.gamma_z},             {"sigma", s.sigma},
                     {"n", s.n},                         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, CurthDgpSpec& s) {
  CurthDgpSpec d;
  d.n_instruments = j.value("n_instruments", d.n_instruments);
  d.n_confounders = j.value("n_confounders", d.n_confounders);
  d.n_modifiers = j.value("n_modifiers", d.n_modifiers);
  d.n_outcome_only = j.value("n_outcome_only", d.n_outcome_only);
  d.n_noise = j.value("n_noise", d.n_noise);
  d.xi = j.value("xi", d.xi);
  d.gamma_z = j.value("gamma_z", d.gamma_z);
  d.sigma = j.value("sigma", d.sigma);
  d.n = j.value("n", d.n);
  d.seed = j.value("seed", d.seed);
  s = d;
}

void to_json(nlohmann::json& j, const SemiSynthSpec& s) {
  j = nlohmann::json{{"confounder_indices", s.confounder_indices},
                     {"alpha0", s.alpha0},
                     {"alpha", s.alpha},
                     {"beta0", s.beta0},
                     {"beta", s.beta},
                     {"tau", s.tau},
                     {"sigma", s.sigma},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SemiSynthSpec& s) {
  SemiSynthSpec d;
  d.confounder_indices = j.value("confounder_indices", d.confounder_indices);
  d.alpha0 = j.value("alpha0", d.alpha0);
  d.alpha = j.value("alpha", d.alpha);
  d.beta0 = j.value("beta0", d.beta0);
  d.beta = j.value("beta", d.beta);
  d.tau = j.value("tau", d.tau);
  d.sigma = j.value("sigma", d.sigma);
  d.seed = j.value("seed", d.seed);
  s = d;
}

Dataset generate_curth(const CurthDgpSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n, p = spec.p();
  const auto ni = static_cast<Eigen::Index>(n);

  struct Block {
    std::size_t count;
    CovariateRole role;
  };
  const Block blocks[] = {{spec.n_instruments, CovariateRole::Instrument},
                          {spec.n_confounders, CovariateRole::Confounder},
                          {spec.n_modifiers, CovariateRole::EffectModifier},
                          {spec.n_outcome_only, CovariateRole::OutcomeOnly},
                          {spec.n_noise, CovariateRole::Noise}};

  Eigen::MatrixXd x(ni, static_cast<Eigen::Index>(p));
  std::vector<CovariateRole> roles;
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    for (std::size_t k = 0; k < b.count; ++k, ++col) {
      x.col(col) = normals(spec.seed, std::string("x.") + std::string(to_string(b.role)), k, n);
      roles.push_back(b.role);
    }
  }

  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(ni), tau = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd m_c = Eigen::VectorXd::Zero(ni), z = Eigen::VectorXd::Zero(ni);
  for (std::size_t j = 0; j < p; ++j) {
    const auto c = x.col(static_cast<Eigen::Index>(j));
    switch (roles[j]) {
      case CovariateRole::Confounder:
        mu0 += c.cwiseAbs2();
        m_c += c.cwiseAbs2();
        break;
      case CovariateRole::OutcomeOnly: mu0 += c.cwiseAbs2(); break;
      case CovariateRole::EffectModifier: tau += c.cwiseAbs2(); break;
      case CovariateRole::Instrument: z += c; break;
      default: break;
    }
  }
  if (spec.n_confounders > 0) m_c /= static_cast<double>(spec.n_confounders);
  if (spec.n_instruments > 0) z /= static_cast<double>(spec.n_instruments);
  const double omega = spec.n_confounders > 0 ? median({m_c.data(), m_c.data() + n}) : 0.0;

  const Eigen::VectorXd u = uniforms(spec.seed, "treatment", 0, n);
  const Eigen::VectorXd eps = normals(spec.seed, "noise", 0, n);
  Eigen::VectorXd e(ni), a(ni), y(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    e[i] = logistic(spec.xi * (m_c[i] - omega) + spec.gamma_z * z[i]);
    a[i] = u[i] < e[i] ? 1.0 : 0.0;
    y[i] = mu0[i] + a[i] * tau[i] + spec.sigma * eps[i];
  }
  GroundTruth truth{tau, e, mu0, mu0 + tau};
  return Dataset(std::move(x), std::move(a), std::move(y), default_names(p), std::move(roles), std::move(truth));
}

namespace {
constexpr double kCancelPi[4] = {1.0 / 3.0, 3.0 / 10.0, 1.0 / 10.0, 9.0 / 10.0};
constexpr double kCancelM[4] = {0.0, -3.0 / 2.0, -4.0 / 3.0, -7.0 / 6.0};
}  // namespace

Dataset generate_cancellation(std::size_t n, double sigma, std::uint64_t seed) {
  require(n >= 8, "n", "must be at least 8");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma", "must be finite and >= 0");
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd u1 = uniforms(seed, "x.cell", 0, n), u2 = uniforms(seed, "x.cell", 1, n);
  const Eigen::VectorXd ua = uniforms(seed, "treatment", 0, n);
  const Eigen::VectorXd eps = normals(seed, "noise", 0, n);
  Eigen::MatrixXd x(ni, 2);
  Eigen::VectorXd a(ni), y(ni), e(ni), m(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    const int x1 = u1[i] < 0.5 ? 1 : 0, x2 = u2[i] < 0.5 ? 1 : 0;
    const int cell = 2 * x1 + x2;
    x(i, 0) = x1;
    x(i, 1) = x2;
    e[i] = kCancelPi[cell];
    m[i] = kCancelM[cell];
    a[i] = ua[i] < e[i] ? 1.0 : 0.0;
    y[i] = m[i] + sigma * eps[i];
  }
  GroundTruth truth{Eigen::VectorXd::Zero(ni), e, m, m};
  return Dataset(std::move(x), std::move(a), std::move(y), {"x1", "x2"},
                 std::vector<CovariateRole>{CovariateRole::Confounder, CovariateRole::Confounder}, std::move(truth));
}

Dataset cancellation_population(std::size_t per_cell) {
  require(per_cell > 0 && per_cell % 30 == 0, "per_cell", "must be a positive multiple of 30");
  const std::size_t n = 4 * per_cell;
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(ni, 2);
  Eigen::VectorXd a(ni), y(ni), e(ni), m(ni);
  // Numerators of pi over 30: 10/30, 9/30, 3/30, 27/30.
  const std::size_t treated_per_30[4] = {10, 9, 3, 27};
  Eigen::Index i = 0;
  for (int cell = 0; cell < 4; ++cell) {
    const std::size_t treated = treated_per_30[cell] * (per_cell / 30);
    for (std::size_t k = 0; k < per_cell; ++k, ++i) {
      x(i, 0) = cell >> 1;
      x(i, 1) = cell & 1;
      a[i] = k < treated ? 1.0 : 0.0;
      e[i] = kCancelPi[cell];
      m[i] = kCancelM[cell];
      y[i] = m[i];
    }
  }
  GroundTruth truth{Eigen::VectorXd::Zero(ni), e, m, m};
  return Dataset(std::move(x), std::move(a), std::move(y), {"x1", "x2"},
                 std::vector<CovariateRole>{CovariateRole::Confounder, CovariateRole::Confounder}, std::move(truth));
}

Dataset generate_cancelling_confounder(std::size_t n, std::uint64_t seed) {
  require(n >= 2, "n", "must be at least 2");
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd zc = normals(seed, "x.instrument", 0, n);
  const Eigen::VectorXd cc = normals(seed, "x.confounder", 0, n);
  const Eigen::VectorXd mc = normals(seed, "x.effect_modifier", 0, n);
  const Eigen::VectorXd oc = normals(seed, "x.outcome_only", 0, n);
  const Eigen::VectorXd ua = uniforms(seed, "treatment", 0, n);
  const Eigen::VectorXd eps = normals(seed, "noise", 0, n);
  Eigen::MatrixXd x(ni, 4);
  x << zc, cc, mc, oc;
  Eigen::VectorXd a(ni), y(ni), e(ni), mu0(ni), mu1(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    const double h = 2.0 * cc[i] + oc[i] + 0.5 * oc[i] * oc[i];
    mu0[i] = h;
    mu1[i] = h + 1.0 + 3.0 * mc[i] * mc[i];
    e[i] = logistic(3.0 * cc[i] + zc[i]);
    a[i] = ua[i] < e[i] ? 1.0 : 0.0;
    y[i] = (a[i] == 1.0 ? mu1[i] : mu0[i]) + 0.5 * eps[i];
  }
  GroundTruth truth{mu1 - mu0, e, mu0, mu1};
  return Dataset(std::move(x), std::move(a), std::move(y), {"Z", "C", "M", "O"},
                 std::vector<CovariateRole>{CovariateRole::Instrument, CovariateRole::Confounder,
                                            CovariateRole::EffectModifier, CovariateRole::OutcomeOnly},
                 std::move(truth));
}

Dataset generate_proxy_confounder(std::size_t n, double noise_sd, std::uint64_t seed, double treatment_coef,
                                  double outcome_coef) {
  require(n >= 2, "n", "must be at least 2");
  require(std::isfinite(noise_sd) && noise_sd > 0.0, "noise_sd", "must be finite and > 0");
  require(std::isfinite(treatment_coef), "treatment_coef", "must be finite");
  require(std::isfinite(outcome_coef), "outcome_coef", "must be finite");
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd u = normals(seed, "latent", 0, n);
  const Eigen::VectorXd e1 = normals(seed, "x.noise", 0, n);
  const Eigen::VectorXd e2 = normals(seed, "x.noise", 1, n);
  const Eigen::VectorXd ua = uniforms(seed, "treatment", 0, n);
  Eigen::MatrixXd x(ni, 3);
  x.col(0) = u + noise_sd * e1;
  x.col(1) = u + noise_sd * e2;
  x.col(2) = u;
  Eigen::VectorXd a(ni), y(ni), e(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    e[i] = logistic(treatment_coef * x(i, 0));
    a[i] = ua[i] < e[i] ? 1.0 : 0.0;
    y[i] = outcome_coef * x(i, 1);
  }
  const Eigen::VectorXd mu = y;
  GroundTruth truth{Eigen::VectorXd::Zero(ni), e, mu, mu};
  return Dataset(std::move(x), std::move(a), std::move(y), {"x1", "x2", "x3"},
                 std::vector<CovariateRole>{CovariateRole::Instrument, CovariateRole::OutcomeOnly,
                                            CovariateRole::Confounder},
                 std::move(truth));
}

Dataset generate_semisynth(const Eigen::MatrixXd& covariates, const SemiSynthSpec& spec,
                           std::vector<std::string> names) {
  const std::size_t n = static_cast<std::size_t>(covariates.rows()), p = static_cast<std::size_t>(covariates.cols());
  if (spec.alpha.size() != spec.confounder_indices.size() || spec.beta.size() != spec.confounder_indices.size()) {
    throw Error(ErrorCode::LengthMismatch, "alpha and beta must have one entry per confounder index");
  }
  spec.validate(p);
  if (!covariates.allFinite()) throw Error(ErrorCode::InvalidSpec, "covariates must be finite");
  if (names.empty()) names = default_names(p);
  const auto ni = static_cast<Eigen::Index>(n);

  Eigen::VectorXd lin_a = Eigen::VectorXd::Constant(ni, spec.alpha0);
  Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(ni, spec.beta0);
  for (std::size_t k = 0; k < spec.confounder_indices.size(); ++k) {
    const auto c = covariates.col(static_cast<Eigen::Index>(spec.confounder_indices[k]));
    lin_a += spec.alpha[k] * c;
    mu0 += spec.beta[k] * c;
  }
  Eigen::VectorXd e(ni);
  for (Eigen::Index i = 0; i < ni; ++i) e[i] = logistic(lin_a[i]);

  constexpr int kMaxAttempts = 100;
  Eigen::VectorXd a(ni);
  bool ok = false;
  for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
    const Eigen::VectorXd u = uniforms(spec.seed, "treatment", static_cast<std::uint64_t>(attempt), n);
    std::size_t treated = 0;
    for (Eigen::Index i = 0; i < ni; ++i) {
      a[i] = u[i] < e[i] ? 1.0 : 0.0;
      treated += a[i] == 1.0;
    }
    ok = treated > 0 && treated < n;
  }
  if (!ok) throw Error(ErrorCode::EmptyArm, "a treatment arm stayed empty after 100 assignment draws");

  const Eigen::VectorXd eps = normals(spec.seed, "noise", 0, n);
  Eigen::VectorXd y(ni);
  for (Eigen::Index i = 0; i < ni; ++i) y[i] = mu0[i] + a[i] * spec.tau + spec.sigma * eps[i];

  std::vector<CovariateRole> roles(p, CovariateRole::Unknown);
  for (std::size_t k = 0; k < spec.confounder_indices.size(); ++k) {
    roles[spec.confounder_indices[k]] = spec.alpha[k] != 0.0 ? CovariateRole::Confounder : CovariateRole::OutcomeOnly;
  }
  GroundTruth truth{Eigen::VectorXd::Constant(ni, spec.tau), e, mu0, mu0.array() + spec.tau};
  return Dataset(covariates, std::move(a), std::move(y), std::move(names), std::move(roles), std::move(truth));
}

CovariateTable simulate_actg_like_covariates(std::size_t n, std::uint64_t seed) {
  require(n >= 2, "n", "must be at least 2");
  const auto ni = static_cast<Eigen::Index>(n);
  // A latent health score couples severity markers the way baseline
  // measurements co-vary in a trial population.
  const Eigen::VectorXd health = normals(seed, "actg.health", 0, n);
  const Eigen::VectorXd g = normals(seed, "actg.gauss", 0, 5 * n);
  const Eigen::VectorXd u = uniforms(seed, "actg.uniform", 0, 7 * n);
  auto gi = [&](int k, Eigen::Index i) { return g[k * ni + i]; };
  auto ui = [&](int k, Eigen::Index i) { return u[k * ni + i]; };

  CovariateTable t;
  t.names = {"age", "wtkg", "hemo", "drugs", "karnof", "race", "gender", "symptom", "str2", "cd40", "cd80"};
  t.x.resize(ni, 11);
  for (Eigen::Index i = 0; i < ni; ++i) {
    const double h = health[i];
    const double age = std::clamp(35.0 + 8.7 * gi(0, i) - 1.5 * h, 12.0, 70.0);
    const double wt = std::clamp(75.0 + 13.0 * gi(1, i), 31.0, 160.0);
    const double karnof_u = logistic(1.2 * h + 0.3) * 0.6 + 0.4 * ui(0, i);
    const double karnof = karnof_u < 0.25 ? 70.0 : karnof_u < 0.45 ? 80.0 : karnof_u < 0.7 ? 90.0 : 100.0;
    const double symptom = ui(1, i) < logistic(-1.6 - 0.9 * h) ? 1.0 : 0.0;
    const double str2 = ui(2, i) < logistic(0.3 + 0.02 * (age - 35.0)) ? 1.0 : 0.0;
    const double cd4 = std::max(0.0, 350.0 + 110.0 * (0.5 * h + 0.866 * gi(2, i)));
    const double cd8 = std::max(40.0, 980.0 + 430.0 * (0.3 * gi(2, i) + 0.954 * gi(3, i)));
    t.x(i, 0) = age;
    t.x(i, 1) = wt;
    t.x(i, 2) = ui(3, i) < 0.08 ? 1.0 : 0.0;
    t.x(i, 3) = ui(4, i) < 0.13 ? 1.0 : 0.0;
    t.x(i, 4) = karnof;
    t.x(i, 5) = ui(5, i) < 0.29 ? 1.0 : 0.0;
    t.x(i, 6) = ui(6, i) < 0.83 ? 1.0 : 0.0;
    t.x(i, 7) = symptom;
    t.x(i, 8) = str2;
    t.x(i, 9) = cd4;
    t.x(i, 10) = cd8;
  }
  for (Eigen::Index c : {0, 1, 4, 9, 10}) {
    auto col = t.x.col(c);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    col = (col.array() - mean) / sd;
  }
  return t;
}

}  // namespace confattr
