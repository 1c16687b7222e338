#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>

#include "confattr/dgp.hpp"
#include "confattr/error.hpp"
#include "confattr/metrics.hpp"

namespace confattr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, field + ": " + why);
}

std::size_t get_count(const json& j, const std::string& key, const std::string& field, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    bad(field, "must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double get_real(const json& j, const std::string& key, const std::string& field, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) bad(field, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(field, "must be finite");
  return d;
}

std::string get_text(const json& j, const std::string& key, const std::string& field, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) bad(field, "must be a string");
  return j.at(key).get<std::string>();
}

bool get_flag(const json& j, const std::string& key, const std::string& field, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) bad(field, "must be true or false");
  return j.at(key).get<bool>();
}

template <class F>
auto named(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    bad(field, e.what());
  }
}

const std::set<std::string> kDgpKinds = {"curth",          "cancellation",     "cancellation_population",
                                         "cancelling_confounder", "proxy_confounder", "semisynth_actg"};

const char* const kCurthCounts[] = {"n_instruments", "n_confounders", "n_modifiers", "n_outcome_only", "n_noise"};

CurthDgpSpec curth_spec(const json& params, std::uint64_t seed) {
  const std::string preset = get_text(params, "preset", "dataset.params.preset", "");
  const std::size_t n = get_count(params, "n", "dataset.params.n", 5000);
  CurthDgpSpec s;
  if (preset == "four") {
    s = CurthDgpSpec::four(n, seed);
  } else if (preset == "seventeen") {
    s = CurthDgpSpec::seventeen(n, seed);
  } else if (preset == "ablation") {
    s = CurthDgpSpec::ablation(get_count(params, "p", "dataset.params.p", 25), n, seed);
  } else if (!preset.empty()) {
    bad("dataset.params.preset", "unknown preset '" + preset + "' (four, seventeen, ablation)");
  }
  std::size_t* counts[] = {&s.n_instruments, &s.n_confounders, &s.n_modifiers, &s.n_outcome_only, &s.n_noise};
  for (std::size_t i = 0; i < 5; ++i) {
    *counts[i] = get_count(params, kCurthCounts[i], std::string("dataset.params.") + kCurthCounts[i], *counts[i]);
  }
  s.xi = get_real(params, "xi", "dataset.params.xi", s.xi);
  s.gamma_z = get_real(params, "gamma_z", "dataset.params.gamma_z", s.gamma_z);
  s.sigma = get_real(params, "sigma", "dataset.params.sigma", s.sigma);
  s.n = n;
  s.seed = seed;
  try {
    s.validate();
  } catch (const Error& e) {
    bad("dataset.params", e.what());
  }
  return s;
}

std::vector<std::uint64_t> parse_seeds(const json& j) {
  if (!j.is_array()) bad("seeds", "must be an array of non-negative integers");
  std::vector<std::uint64_t> seeds;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) bad("seeds", "must be an array of non-negative integers");
    seeds.push_back(v.get<std::uint64_t>());
  }
  if (seeds.empty()) bad("seeds", "must not be empty");
  return seeds;
}

template <class T, class F>
std::vector<T> parse_list(const json& j, const std::string& field, F&& one) {
  if (!j.is_array() || j.empty()) bad(field, "must be a non-empty array");
  std::vector<T> out;
  for (const auto& v : j) out.push_back(one(v));
  return out;
}

std::size_t parse_size(const json& v, const std::string& field) {
  if (!v.is_number_unsigned()) bad(field, "entries must be non-negative integers");
  return v.get<std::size_t>();
}

// Files and directories created by one command; removed unless committed.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) {
      if (fs::is_directory(*it, ec) && fs::is_empty(*it, ec)) fs::remove(*it, ec);
    }
  }

  void directory(const fs::path& dir) {
    std::vector<fs::path> missing;
    for (fs::path d = dir; !d.empty() && !fs::exists(d); d = d.parent_path()) {
      missing.push_back(d);
      if (d == d.parent_path()) break;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create directory '" + dir.string() + "'");
    dirs_.insert(dirs_.end(), missing.rbegin(), missing.rend());
  }

  const fs::path& file(const fs::path& path) {
    files_.push_back(path);
    return files_.back();
  }

  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

void write_json(const json& j, const fs::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::string d2s(double v) { return format_double(v); }

fs::path run_dir(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.seeds.size() == 1) return cfg.output_dir;
  return cfg.output_dir / ("seed_" + std::to_string(seed));
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void check_output_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_directory(dir, ec)) bad("output_dir", "'" + dir.string() + "' is not a directory");
}

// Attribution CSV: covariate, phi, abs_phi, rank; rows by descending |phi|.
void write_attributions(const Dataset& ds, const Attribution& att, const fs::path& path) {
  auto out = open_out(path);
  out << "covariate,phi,abs_phi,rank\n";
  const auto order = rank_order(att.phi);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double v = att.phi[static_cast<Eigen::Index>(order[r])];
    out << ds.names()[order[r]] << ',' << d2s(v) << ',' << d2s(std::abs(v)) << ',' << r + 1 << '\n';
  }
  finish(out, path);
}

void write_local(const Dataset& ds, const Eigen::MatrixXd& local, const fs::path& path) {
  auto out = open_out(path);
  out << "unit";
  for (const auto& name : ds.names()) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < local.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < local.cols(); ++j) out << ',' << d2s(local(i, j));
    out << '\n';
  }
  finish(out, path);
}

void validate_attributions(const fs::path& path, std::size_t p) {
  const CsvTable t = read_csv_table(path);
  if (t.rows.size() != p) throw Error(ErrorCode::Io, "'" + path.string() + "' has the wrong row count");
  for (const auto& row : t.rows) {
    if (!std::isfinite(std::stod(row.at(1)))) throw Error(ErrorCode::Io, "non-finite attribution in output");
  }
}

std::string method_label(const Attribution& att) {
  return att.exact_fallback ? "exact-fallback" : std::string(to_string(att.method));
}

// Natural order: x2 before x10.
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t i2 = i, j2 = j;
      while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
      while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
      const auto na = a.substr(i, i2 - i), nb = b.substr(j, j2 - j);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = i2;
      j = j2;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) bad("config", "must be a JSON object");
  RunConfig cfg;

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (!d.is_object()) bad("dataset", "must be an object");
    const bool has_path = d.contains("path"), has_kind = d.contains("kind");
    const std::string source = get_text(d, "source", "dataset.source", has_path ? "csv" : "dgp");
    if (has_path && has_kind) bad("dataset", "give exactly one source: a csv path or a dgp kind");
    if (source == "csv") {
      if (!has_path) bad("dataset.path", "required for a csv source");
      CsvSource c;
      c.path = get_text(d, "path", "dataset.path", "");
      c.treatment = get_text(d, "treatment", "dataset.treatment", c.treatment);
      c.outcome = get_text(d, "outcome", "dataset.outcome", c.outcome);
      if (d.contains("roles")) c.roles = get_text(d, "roles", "dataset.roles", "");
      if (d.contains("truth")) c.truth = get_text(d, "truth", "dataset.truth", "");
      const std::string impute = get_text(d, "impute", "dataset.impute", "none");
      if (impute == "median") {
        c.impute = Imputation::Median;
      } else if (impute != "none") {
        bad("dataset.impute", "must be none or median");
      }
      cfg.csv = c;
    } else if (source == "dgp") {
      if (has_path) bad("dataset", "give exactly one source: a csv path or a dgp kind");
      DgpSource g;
      g.kind = get_text(d, "kind", "dataset.kind", g.kind);
      if (!kDgpKinds.contains(g.kind)) bad("dataset.kind", "unknown generator '" + g.kind + "'");
      if (d.contains("params")) {
        if (!d.at("params").is_object()) bad("dataset.params", "must be an object");
        g.params = d.at("params");
      }
      cfg.dgp = g;
      if (g.kind == "curth") curth_spec(g.params, 0);
    } else {
      bad("dataset.source", "must be csv or dgp");
    }
  }

  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    if (!b.is_object()) bad("backend", "must be an object");
    auto& be = cfg.backend;
    be.kind = named("backend.kind", [&] { return backend_kind_from_string(get_text(b, "kind", "backend.kind", "auto")); });
    be.k = get_count(b, "k", "backend.k", be.k);
    be.max_cardinality = get_count(b, "max_cardinality", "backend.max_cardinality", be.max_cardinality);
    be.max_depth = get_count(b, "max_depth", "backend.max_depth", be.max_depth);
    be.min_leaf = get_count(b, "min_leaf", "backend.min_leaf", be.min_leaf);
    be.rounds = get_count(b, "rounds", "backend.rounds", be.rounds);
    be.learning_rate = get_real(b, "learning_rate", "backend.learning_rate", be.learning_rate);
    if (be.min_leaf == 0) bad("backend.min_leaf", "must be at least 1");
    if (!(be.learning_rate > 0.0 && be.learning_rate <= 1.0)) bad("backend.learning_rate", "must lie in (0, 1]");
  }

  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    if (!e.is_object()) bad("estimator", "must be an object");
    auto& est = cfg.estimator;
    est.method = named("estimator.method", [&] { return method_from_string(get_text(e, "method", "estimator.method", "exact")); });
    est.budget = get_count(e, "budget", "estimator.budget", est.budget);
    est.max_exact_players = get_count(e, "max_exact_players", "estimator.max_exact_players", est.max_exact_players);
    est.local = get_flag(e, "local", "estimator.local", est.local);
  }
  if (cfg.estimator.method != Method::Exact && cfg.estimator.budget == 0) {
    bad("estimator.budget", "required for budgeted methods");
  }

  cfg.value_mode = named("value_mode", [&] { return value_mode_from_string(get_text(j, "value_mode", "value_mode", "signed")); });
  cfg.crossfit_folds = get_count(j, "crossfit_folds", "crossfit_folds", 0);
  if (j.contains("seeds")) cfg.seeds = parse_seeds(j.at("seeds"));
  cfg.output_dir = get_text(j, "output_dir", "output_dir", cfg.output_dir.string());
  if (cfg.output_dir.empty()) bad("output_dir", "must not be empty");

  if (j.contains("benchmark")) {
    const auto& b = j.at("benchmark");
    if (!b.is_object()) bad("benchmark", "must be an object");
    auto& g = cfg.benchmark;
    g.experiment_id = get_text(b, "experiment_id", "benchmark.experiment_id", g.experiment_id);
    if (b.contains("dimensions")) {
      g.dimensions = parse_list<std::size_t>(b.at("dimensions"), "benchmark.dimensions",
                                             [](const json& v) { return parse_size(v, "benchmark.dimensions"); });
    }
    if (b.contains("budgets")) {
      g.budgets = parse_list<std::size_t>(b.at("budgets"), "benchmark.budgets",
                                          [](const json& v) { return parse_size(v, "benchmark.budgets"); });
    }
    if (b.contains("methods")) {
      g.methods = parse_list<Method>(b.at("methods"), "benchmark.methods", [](const json& v) {
        if (!v.is_string()) bad("benchmark.methods", "entries must be strings");
        return named("benchmark.methods", [&] { return method_from_string(v.get<std::string>()); });
      });
    }
    g.n = get_count(b, "n", "benchmark.n", g.n);
    for (auto p : g.dimensions) {
      if (p < 2) bad("benchmark.dimensions", "entries must be at least 2");
    }
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  if (cfg.csv) {
    const auto& c = *cfg.csv;
    json d{{"source", "csv"}, {"path", c.path.string()}, {"treatment", c.treatment}, {"outcome", c.outcome},
           {"impute", c.impute == Imputation::Median ? "median" : "none"}};
    if (c.roles) d["roles"] = c.roles->string();
    if (c.truth) d["truth"] = c.truth->string();
    j["dataset"] = d;
  } else if (cfg.dgp) {
    j["dataset"] = {{"source", "dgp"}, {"kind", cfg.dgp->kind}, {"params", cfg.dgp->params}};
  }
  const auto& b = cfg.backend;
  j["backend"] = {{"kind", std::string(to_string(b.kind))},
                  {"k", b.k},
                  {"max_cardinality", b.max_cardinality},
                  {"max_depth", b.max_depth},
                  {"min_leaf", b.min_leaf},
                  {"rounds", b.rounds},
                  {"learning_rate", b.learning_rate}};
  const auto& e = cfg.estimator;
  j["estimator"] = {{"method", std::string(to_string(e.method))},
                    {"budget", e.budget},
                    {"max_exact_players", e.max_exact_players},
                    {"local", e.local}};
  j["value_mode"] = std::string(to_string(cfg.value_mode));
  j["crossfit_folds"] = cfg.crossfit_folds;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir.string();
  json methods = json::array();
  for (auto m : cfg.benchmark.methods) methods.push_back(std::string(to_string(m)));
  j["benchmark"] = {{"experiment_id", cfg.benchmark.experiment_id},
                    {"dimensions", cfg.benchmark.dimensions},
                    {"budgets", cfg.benchmark.budgets},
                    {"methods", methods},
                    {"n", cfg.benchmark.n}};
  return j;
}

Dataset materialize(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.csv) {
    const auto& c = *cfg.csv;
    Dataset ds = load_csv(c.path, c.treatment, c.outcome, c.impute);
    if (c.roles) ds = ds.with_roles(load_roles(*c.roles, ds.names()));
    if (c.truth) {
      GroundTruth t = load_truth(*c.truth);
      if (static_cast<std::size_t>(t.tau.size()) != ds.n()) {
        throw Error(ErrorCode::LengthMismatch, "truth file row count differs from the dataset");
      }
      ds = Dataset(ds.x(), ds.a(), ds.y(), ds.names(), ds.roles(), std::move(t));
    }
    return ds;
  }
  if (!cfg.dgp) bad("dataset", "no dataset source configured");
  const auto& k = cfg.dgp->kind;
  const auto& p = cfg.dgp->params;
  if (k == "curth") return generate_curth(curth_spec(p, seed));
  if (k == "cancellation") {
    return generate_cancellation(get_count(p, "n", "dataset.params.n", 5000),
                                 get_real(p, "sigma", "dataset.params.sigma", 1.0), seed);
  }
  if (k == "cancellation_population") {
    return cancellation_population(get_count(p, "per_cell", "dataset.params.per_cell", 30));
  }
  if (k == "cancelling_confounder") {
    return generate_cancelling_confounder(get_count(p, "n", "dataset.params.n", 5000), seed);
  }
  if (k == "proxy_confounder") {
    return generate_proxy_confounder(get_count(p, "n", "dataset.params.n", 5000),
                                     get_real(p, "noise_sd", "dataset.params.noise_sd", 0.5), seed,
                                     get_real(p, "treatment_coef", "dataset.params.treatment_coef", 2.0),
                                     get_real(p, "outcome_coef", "dataset.params.outcome_coef", 2.0));
  }
  // semisynth_actg
  const std::size_t n = get_count(p, "n", "dataset.params.n", 1054);
  const std::uint64_t cov_seed = get_count(p, "covariate_seed", "dataset.params.covariate_seed", seed);
  const bool confounded = get_flag(p, "confounded", "dataset.params.confounded", true);
  SemiSynthSpec spec = confounded ? SemiSynthSpec::actg(seed) : SemiSynthSpec::actg_randomized(seed);
  if (p.contains("spec")) {
    json merged;
    to_json(merged, spec);
    merged.update(p.at("spec"));
    merged["seed"] = seed;
    from_json(merged, spec);
  }
  auto cov = simulate_actg_like_covariates(n, cov_seed);
  return generate_semisynth(cov.x, spec, cov.names);
}

void cmd_dgp(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.dgp) bad("dataset", "the dgp command needs a dgp source");
  check_output_dir(cfg.output_dir);
  OutputGuard guard;
  for (auto seed : cfg.seeds) {
    const Dataset ds = materialize(cfg, seed);
    const fs::path dir = run_dir(cfg, seed);
    guard.directory(dir);
    write_csv(ds, guard.file(dir / "data.csv"));
    write_roles(ds, guard.file(dir / "roles.csv"));
    if (ds.truth()) write_truth(ds, guard.file(dir / "truth.csv"));
    json manifest{{"schema_version", kSchemaVersion}, {"command", "dgp"},       {"config", to_json(cfg)},
                  {"seed", seed},                     {"n", ds.n()},             {"p", ds.p()},
                  {"n_treated", ds.n_treated()},      {"n_control", ds.n_control()}};
    write_json(manifest, guard.file(dir / "manifest.json"));
    log << "seed " << seed << ": n=" << ds.n() << " p=" << ds.p() << " treated=" << ds.n_treated()
        << " control=" << ds.n_control() << '\n';
  }
  guard.commit();
}

void cmd_attribute(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.csv && !cfg.dgp) bad("dataset", "no dataset source configured");
  check_output_dir(cfg.output_dir);
  OutputGuard guard;
  for (auto seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset ds = materialize(cfg, seed);
    auto game = build_game(std::move(ds), cfg.backend, GameOptions{cfg.value_mode, cfg.crossfit_folds, 0});
    EstimatorConfig est = cfg.estimator;
    est.seed = seed;
    const Attribution att = estimate(*game, est);
    const double wall = elapsed_ms(t0);
    const Dataset& data = game->dataset();

    const fs::path dir = run_dir(cfg, seed);
    guard.directory(dir);
    const fs::path attr_path = guard.file(dir / "attributions.csv");
    write_attributions(data, att, attr_path);
    json outputs{{"attributions", "attributions.csv"}, {"coalitions", "coalitions.jsonl"}};
    if (att.local_phi) {
      write_local(data, *att.local_phi, guard.file(dir / "local_attributions.csv"));
      outputs["local_attributions"] = "local_attributions.csv";
    }
    game->write_log(guard.file(dir / "coalitions.jsonl"));
    json manifest{{"schema_version", kSchemaVersion},
                  {"command", "attribute"},
                  {"config", to_json(cfg)},
                  {"seed", seed},
                  {"n", data.n()},
                  {"p", data.p()},
                  {"method", method_label(att)},
                  {"budget", est.budget},
                  {"budget_used", att.budget_used},
                  {"eval_count", game->eval_count()},
                  {"cache_hits", game->cache_hits()},
                  {"base_value", att.base_value},
                  {"full_value", att.full_value},
                  {"efficiency_gap", att.efficiency_gap},
                  {"tau_bar", game->pseudo().tau_bar},
                  {"wall_time_ms", wall},
                  {"outputs", outputs}};
    write_json(manifest, guard.file(dir / "manifest.json"));
    validate_attributions(attr_path, data.p());
    log << "seed " << seed << ": p=" << data.p() << " method=" << method_label(att)
        << " eval_count=" << game->eval_count() << " top=" << data.names()[rank_order(att.phi).front()] << '\n';
  }
  guard.commit();
}

void cmd_benchmark(const RunConfig& cfg, std::ostream& log) {
  check_output_dir(cfg.output_dir);
  const auto& grid = cfg.benchmark;
  const auto t0 = std::chrono::steady_clock::now();

  struct Row {
    std::size_t p, budget;
    std::size_t method_rank;
    std::string method;
    std::uint64_t seed;
    std::string metric;
    double value;
  };
  std::vector<Row> rows;
  std::size_t evals = 0;
  for (auto p : grid.dimensions) {
    for (auto seed : cfg.seeds) {
      // One game per (p, seed): every budget and method reads the same cache.
      auto game = build_game(generate_curth(CurthDgpSpec::ablation(p, grid.n, seed)), cfg.backend,
                             GameOptions{cfg.value_mode, cfg.crossfit_folds, 0});
      const auto confounders = game->dataset().indices_with_role(CovariateRole::Confounder);
      for (auto budget : grid.budgets) {
        for (std::size_t m = 0; m < grid.methods.size(); ++m) {
          EstimatorConfig est = cfg.estimator;
          est.method = grid.methods[m];
          est.budget = budget;
          est.seed = seed;
          const Attribution att = estimate(*game, est);
          const std::string label(to_string(grid.methods[m]));
          rows.push_back({p, budget, m, label, seed, "confounder_mass", confounder_mass(att.phi, confounders)});
          rows.push_back({p, budget, m, label, seed, "confounder_recovery", confounder_recovery(att.phi, confounders)});
        }
      }
      evals += game->eval_count();
      log << "p=" << p << " seed=" << seed << " eval_count=" << game->eval_count() << '\n';
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.p, a.budget, a.method_rank, a.seed, a.metric) <
           std::tie(b.p, b.budget, b.method_rank, b.seed, b.metric);
  });

  OutputGuard guard;
  guard.directory(cfg.output_dir);
  const fs::path path = guard.file(cfg.output_dir / "metrics.csv");
  auto out = open_out(path);
  out << "experiment_id,p,budget,method,seed,metric,value\n";
  for (const auto& r : rows) {
    out << grid.experiment_id << ',' << r.p << ',' << r.budget << ',' << r.method << ',' << r.seed << ',' << r.metric
        << ',' << d2s(r.value) << '\n';
  }
  finish(out, path);
  json manifest{{"schema_version", kSchemaVersion}, {"command", "benchmark"},     {"config", to_json(cfg)},
                {"rows", rows.size()},              {"eval_count", evals},         {"wall_time_ms", elapsed_ms(t0)},
                {"outputs", {{"metrics", "metrics.csv"}}}};
  write_json(manifest, guard.file(cfg.output_dir / "manifest.json"));
  guard.commit();
  log << "wrote " << rows.size() << " metric rows\n";
}

void cmd_metrics(const MetricsInputs& in, std::ostream& log) {
  if (in.runs.size() < 2) throw Error(ErrorCode::MissingRuns, "at least two attribution files are required");
  check_output_dir(in.output_dir);

  struct Run {
    std::map<std::string, double> phi;
    json meta;
  };
  std::vector<Run> runs;
  for (const auto& path : in.runs) {
    const CsvTable t = read_csv_table(path);
    const auto col = [&](const std::string& name) {
      const auto it = std::find(t.header.begin(), t.header.end(), name);
      if (it == t.header.end()) throw Error(ErrorCode::MissingColumn, "'" + path.string() + "' lacks column " + name);
      return static_cast<std::size_t>(it - t.header.begin());
    };
    const std::size_t c_name = col("covariate"), c_phi = col("phi");
    Run r;
    for (const auto& row : t.rows) {
      try {
        r.phi[row.at(c_name)] = std::stod(row.at(c_phi));
      } catch (const std::exception&) {
        throw Error(ErrorCode::NonNumericCell, "'" + path.string() + "': bad phi '" + row.at(c_phi) + "'");
      }
    }
    const fs::path manifest = path.parent_path() / "manifest.json";
    if (fs::exists(manifest)) {
      std::ifstream mf(manifest);
      r.meta = json::parse(mf, nullptr, false);
      if (r.meta.is_discarded()) r.meta = json::object();
    }
    runs.push_back(std::move(r));
  }

  std::vector<std::string> names;
  for (const auto& [name, v] : runs.front().phi) names.push_back(name);
  std::sort(names.begin(), names.end(), natural_less);
  const std::size_t p = names.size();
  std::vector<Eigen::VectorXd> phis;
  for (const auto& r : runs) {
    if (r.phi.size() != p) throw Error(ErrorCode::InconsistentWidth, "attribution files differ in covariate count");
    Eigen::VectorXd v(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      const auto it = r.phi.find(names[j]);
      if (it == r.phi.end()) throw Error(ErrorCode::InconsistentWidth, "attribution files differ in covariate names");
      v[static_cast<Eigen::Index>(j)] = it->second;
    }
    phis.push_back(v);
  }
  const RankStabilityTable table = rank_stability(phis);

  std::vector<std::size_t> confounders;
  for (const auto& c : in.confounders) {
    const auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) bad("confounders", "unknown covariate '" + c + "'");
    confounders.push_back(static_cast<std::size_t>(it - names.begin()));
  }

  OutputGuard guard;
  guard.directory(in.output_dir);
  json outputs = json::object();

  {
    const fs::path path = guard.file(in.output_dir / "rank_stability.csv");
    auto out = open_out(path);
    out << "covariate,rank,count,share\n";
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t r = 0; r < p; ++r) {
        out << names[j] << ',' << r + 1 << ',' << table.counts[j][r] << ','
            << d2s(static_cast<double>(table.counts[j][r]) / static_cast<double>(table.n_runs)) << '\n';
      }
    }
    finish(out, path);
    outputs["rank_stability"] = "rank_stability.csv";
  }

  json summary = json::array();
  {
    const fs::path path = guard.file(in.output_dir / "stability.csv");
    auto out = open_out(path);
    out << "run,covariate,phi,abs_phi\n";
    for (std::size_t r = 0; r < phis.size(); ++r) {
      for (std::size_t j = 0; j < p; ++j) {
        const double v = phis[r][static_cast<Eigen::Index>(j)];
        out << r << ',' << names[j] << ',' << d2s(v) << ',' << d2s(std::abs(v)) << '\n';
      }
    }
    finish(out, path);
    outputs["stability"] = "stability.csv";

    const fs::path spath = guard.file(in.output_dir / "summary.csv");
    auto sout = open_out(spath);
    sout << "covariate,mean_phi,mean_abs_phi,sd_abs_phi,mean_rank\n";
    const double nr = static_cast<double>(phis.size());
    for (std::size_t j = 0; j < p; ++j) {
      double mean = 0.0, mean_abs = 0.0, rank_sum = 0.0;
      for (const auto& v : phis) {
        mean += v[static_cast<Eigen::Index>(j)];
        mean_abs += std::abs(v[static_cast<Eigen::Index>(j)]);
      }
      mean /= nr;
      mean_abs /= nr;
      double ss = 0.0;
      for (const auto& v : phis) ss += std::pow(std::abs(v[static_cast<Eigen::Index>(j)]) - mean_abs, 2);
      for (std::size_t r = 0; r < p; ++r) rank_sum += static_cast<double>((r + 1) * table.counts[j][r]);
      const double sd = std::sqrt(ss / (nr - 1.0));
      sout << names[j] << ',' << d2s(mean) << ',' << d2s(mean_abs) << ',' << d2s(sd) << ',' << d2s(rank_sum / nr)
           << '\n';
      summary.push_back({{"covariate", names[j]}, {"mean_abs_phi", mean_abs}, {"mean_rank", rank_sum / nr}});
    }
    finish(sout, spath);
    outputs["summary"] = "summary.csv";
  }

  const auto meta_of = [&](std::size_t r) {
    const json m = runs[r].meta.is_object() ? runs[r].meta : json::object();
    return std::make_tuple(m.value("budget", std::size_t{0}), m.value("method", std::string("unknown")),
                           m.value("seed", static_cast<std::uint64_t>(r)));
  };

  if (!confounders.empty()) {
    const fs::path path = guard.file(in.output_dir / "metrics.csv");
    auto out = open_out(path);
    out << "experiment_id,p,budget,method,seed,metric,value\n";
    for (std::size_t r = 0; r < phis.size(); ++r) {
      const auto [budget, method, seed] = meta_of(r);
      const std::string prefix = in.experiment_id + ',' + std::to_string(p) + ',' + std::to_string(budget) + ',' +
                                 method + ',' + std::to_string(seed) + ',';
      out << prefix << "confounder_mass," << d2s(confounder_mass(phis[r], confounders)) << '\n';
      out << prefix << "confounder_recovery," << d2s(confounder_recovery(phis[r], confounders)) << '\n';
    }
    finish(out, path);
    outputs["metrics"] = "metrics.csv";
  }

  if (in.dataset_dir) {
    const fs::path& dir = *in.dataset_dir;
    Dataset ds = load_csv(dir / "data.csv", "a", "y");
    ds = Dataset(ds.x(), ds.a(), ds.y(), ds.names(), std::nullopt, load_truth(dir / "truth.csv"));
    std::vector<Eigen::Index> perm;
    for (const auto& name : ds.names()) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end() || ds.p() != p) {
        throw Error(ErrorCode::InconsistentWidth, "dataset covariates differ from the attribution files");
      }
      perm.push_back(it - names.begin());
    }
    const fs::path path = guard.file(in.output_dir / "pehe_drop.csv");
    auto out = open_out(path);
    out << "run,seed,strategy,k,pehe\n";
    for (std::size_t r = 0; r < phis.size(); ++r) {
      const Eigen::VectorXd phi = phis[r](perm);
      const auto seed = std::get<2>(meta_of(r));
      LearnerConfig learner{in.learner, 0.3, seed};
      for (const auto& strategy : {DropStrategy::top(), DropStrategy::random(seed), DropStrategy::bottom()}) {
        for (const auto& row : feature_drop_pehe(ds, phi, in.drop_k, strategy, learner)) {
          out << r << ',' << seed << ',' << to_string(row.strategy.kind) << ',' << row.k << ',' << d2s(row.pehe)
              << '\n';
        }
      }
    }
    finish(out, path);
    outputs["pehe_drop"] = "pehe_drop.csv";
  }

  json inputs = json::array();
  for (const auto& path : in.runs) inputs.push_back(path.string());
  json report{{"schema_version", kSchemaVersion}, {"command", "metrics"}, {"experiment_id", in.experiment_id},
              {"n_runs", phis.size()},            {"p", p},              {"inputs", inputs},
              {"covariates", summary},            {"outputs", outputs}};
  write_json(report, guard.file(in.output_dir / "report.json"));
  guard.commit();
  log << "aggregated " << phis.size() << " runs over " << p << " covariates\n";
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Overrides {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::string dgp, csv, treatment, outcome, roles, truth, impute;
  std::optional<std::size_t> n;
  std::string backend;
  std::optional<std::size_t> k, rounds, min_leaf, max_depth;
  std::optional<double> learning_rate;
  std::string method;
  std::optional<std::size_t> budget;
  bool local = false;
  std::string value_mode;
  std::optional<std::size_t> crossfit;
  std::vector<std::size_t> dimensions, budgets;
  std::string methods, experiment_id;
  bool emit_config = false;
};

void add_run_options(CLI::App* app, Overrides& o, bool benchmark) {
  app->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--seed", o.seeds, "Seed(s); replaces the config's seed list");
  app->add_option("--backend", o.backend, "auto, exact_cell_mean, knn, tree, boosted_stumps");
  app->add_option("--k", o.k, "kNN neighbour count (0 = sqrt rule)");
  app->add_option("--rounds", o.rounds, "Boosting rounds");
  app->add_option("--learning-rate", o.learning_rate, "Boosting shrinkage");
  app->add_option("--min-leaf", o.min_leaf, "Tree and boosting leaf size");
  app->add_option("--max-depth", o.max_depth, "Tree depth");
  app->add_option("--value-mode", o.value_mode, "signed, absolute, squared");
  app->add_option("--crossfit", o.crossfit, "Cross-fitting folds (0 = off)");
  app->add_flag("--emit-config", o.emit_config, "Print the resolved config and exit");
  if (benchmark) {
    app->add_option("--dimensions", o.dimensions, "Covariate counts");
    app->add_option("--budgets", o.budgets, "Coalition budgets");
    app->add_option("--methods", o.methods, "Comma-separated estimators");
    app->add_option("--n", o.n, "Sample size per dataset");
    app->add_option("--experiment-id", o.experiment_id, "Label for the metric rows");
    return;
  }
  app->add_option("--dgp", o.dgp, "Generator kind");
  app->add_option("--n", o.n, "Sample size for the generator");
  if (app->get_name() == "attribute") {
    app->add_option("--csv", o.csv, "Dataset CSV");
    app->add_option("--treatment", o.treatment, "Treatment column (csv)");
    app->add_option("--outcome", o.outcome, "Outcome column (csv)");
    app->add_option("--roles", o.roles, "Role sidecar CSV (csv)");
    app->add_option("--truth", o.truth, "Ground-truth sidecar CSV (csv)");
    app->add_option("--impute", o.impute, "none or median (csv)");
    app->add_option("--method", o.method, "exact, msr, kernelshap, regression_msr");
    app->add_option("--budget", o.budget, "Coalition budget");
    app->add_flag("--local", o.local, "Also write per-unit attributions (exact only)");
  }
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "config: '" + path + "' is not valid JSON");
  return j;
}

json apply_overrides(json j, const Overrides& o) {
  if (!j.is_object()) bad("config", "must be a JSON object");
  if (!o.dgp.empty() && !o.csv.empty()) bad("dataset", "give exactly one of --dgp and --csv");
  if (!o.csv.empty()) {
    j["dataset"] = json{{"source", "csv"}, {"path", o.csv}};
  } else if (!o.dgp.empty()) {
    json params = json::object();
    if (j.contains("dataset") && j["dataset"].value("kind", "") == o.dgp && j["dataset"].contains("params")) {
      params = j["dataset"]["params"];
    }
    j["dataset"] = json{{"source", "dgp"}, {"kind", o.dgp}, {"params", params}};
  }
  auto& d = j["dataset"];
  if (d.is_null()) j.erase("dataset");
  if (j.contains("dataset")) {
    if (!o.treatment.empty()) j["dataset"]["treatment"] = o.treatment;
    if (!o.outcome.empty()) j["dataset"]["outcome"] = o.outcome;
    if (!o.roles.empty()) j["dataset"]["roles"] = o.roles;
    if (!o.truth.empty()) j["dataset"]["truth"] = o.truth;
    if (!o.impute.empty()) j["dataset"]["impute"] = o.impute;
    if (o.n && j["dataset"].value("source", "dgp") == "dgp" && !j["dataset"].contains("path")) {
      j["dataset"]["params"]["n"] = *o.n;
    }
  }
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (!o.seeds.empty()) j["seeds"] = o.seeds;
  if (!o.backend.empty()) j["backend"]["kind"] = o.backend;
  if (o.k) j["backend"]["k"] = *o.k;
  if (o.rounds) j["backend"]["rounds"] = *o.rounds;
  if (o.learning_rate) j["backend"]["learning_rate"] = *o.learning_rate;
  if (o.min_leaf) j["backend"]["min_leaf"] = *o.min_leaf;
  if (o.max_depth) j["backend"]["max_depth"] = *o.max_depth;
  if (!o.method.empty()) j["estimator"]["method"] = o.method;
  if (o.budget) j["estimator"]["budget"] = *o.budget;
  if (o.local) j["estimator"]["local"] = true;
  if (!o.value_mode.empty()) j["value_mode"] = o.value_mode;
  if (o.crossfit) j["crossfit_folds"] = *o.crossfit;
  if (!o.dimensions.empty()) j["benchmark"]["dimensions"] = o.dimensions;
  if (!o.budgets.empty()) j["benchmark"]["budgets"] = o.budgets;
  if (!o.methods.empty()) j["benchmark"]["methods"] = split_commas(o.methods);
  if (!o.experiment_id.empty()) j["benchmark"]["experiment_id"] = o.experiment_id;
  if (o.n && j.contains("benchmark")) j["benchmark"]["n"] = *o.n;
  return j;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Covariate attribution of residual confounding bias"};
  app.require_subcommand(1);
  Overrides dgp_o, attr_o, bench_o;
  auto* dgp = app.add_subcommand("dgp", "Generate a synthetic dataset with roles and ground truth");
  add_run_options(dgp, dgp_o, false);
  auto* attribute = app.add_subcommand("attribute", "Attribute confounding bias to covariates");
  add_run_options(attribute, attr_o, false);
  auto* benchmark = app.add_subcommand("benchmark", "Budget x dimension x method x seed ablation grid");
  add_run_options(benchmark, bench_o, true);

  MetricsInputs mi;
  std::vector<std::string> runs;
  std::string confounders, dataset_dir, out, learner;
  auto* metrics = app.add_subcommand("metrics", "Aggregate stored attribution files");
  metrics->add_option("--runs", runs, "attributions.csv files")->required();
  metrics->add_option("--confounders", confounders, "Comma-separated confounder names");
  metrics->add_option("--dataset", dataset_dir, "Directory with data.csv and truth.csv for PEHE drop");
  metrics->add_option("--k", mi.drop_k, "Covariates dropped for PEHE");
  metrics->add_option("--learner", learner, "Regression backend for PEHE refits");
  metrics->add_option("--experiment-id", mi.experiment_id, "Label for metric rows");
  metrics->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*metrics) {
      for (const auto& r : runs) mi.runs.emplace_back(r);
      mi.confounders = split_commas(confounders);
      if (!dataset_dir.empty()) mi.dataset_dir = dataset_dir;
      if (!out.empty()) mi.output_dir = out;
      if (!learner.empty()) {
        mi.learner = RegressionBackend{};
        mi.learner.kind = named("learner", [&] { return backend_kind_from_string(learner); });
      }
      cmd_metrics(mi, std::cout);
      return kExitOk;
    }
    Overrides& o = *dgp ? dgp_o : (*attribute ? attr_o : bench_o);
    const RunConfig cfg = parse_run_config(apply_overrides(load_config_file(o.config), o));
    if (o.emit_config) {
      std::cout << to_json(cfg).dump(2) << '\n';
      return kExitOk;
    }
    if (*dgp) {
      cmd_dgp(cfg, std::cout);
    } else if (*attribute) {
      cmd_attribute(cfg, std::cout);
    } else {
      cmd_benchmark(cfg, std::cout);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace confattr::cli
