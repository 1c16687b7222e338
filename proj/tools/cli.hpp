#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "confattr/bias_game.hpp"
#include "confattr/dataset.hpp"
#include "confattr/regression.hpp"
#include "confattr/shapley.hpp"

namespace confattr::cli {

inline constexpr int kSchemaVersion = 1;

/// Exit codes: 0 success, 1 library or IO failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CsvSource {
  std::filesystem::path path;
  std::string treatment = "a";
  std::string outcome = "y";
  std::optional<std::filesystem::path> roles;
  std::optional<std::filesystem::path> truth;
  Imputation impute = Imputation::None;
};

/// Generator name plus its parameters. Kinds: curth, cancellation,
/// cancellation_population, cancelling_confounder, proxy_confounder,
/// semisynth_actg.
struct DgpSource {
  std::string kind = "curth";
  nlohmann::json params = nlohmann::json::object();
};

struct BenchmarkGrid {
  std::string experiment_id = "ablation";
  std::vector<std::size_t> dimensions{25};
  std::vector<std::size_t> budgets{256, 512, 1024};
  std::vector<Method> methods{Method::MSR, Method::RegressionMSR};
  std::size_t n = 2000;
};

struct RunConfig {
  std::optional<CsvSource> csv;
  std::optional<DgpSource> dgp;
  RegressionBackend backend;
  EstimatorConfig estimator;
  ValueMode value_mode = ValueMode::Signed;
  std::size_t crossfit_folds = 0;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "out";
  BenchmarkGrid benchmark;
};

/// Parses and validates; throws Error(InvalidConfig) naming the field.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Dataset for one seed. DGP sources take the seed; CSV sources ignore it.
Dataset materialize(const RunConfig& cfg, std::uint64_t seed);

struct MetricsInputs {
  std::vector<std::filesystem::path> runs;
  std::vector<std::string> confounders;
  /// Directory written by `dgp` (data.csv, roles.csv, truth.csv).
  std::optional<std::filesystem::path> dataset_dir;
  std::vector<std::size_t> drop_k{5};
  RegressionBackend learner = RegressionBackend::boosted_stumps();
  std::string experiment_id = "metrics";
  std::filesystem::path output_dir = "out";
};

void cmd_dgp(const RunConfig& cfg, std::ostream& log);
void cmd_attribute(const RunConfig& cfg, std::ostream& log);
void cmd_benchmark(const RunConfig& cfg, std::ostream& log);
void cmd_metrics(const MetricsInputs& inputs, std::ostream& log);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace confattr::cli
