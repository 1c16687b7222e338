#include <doctest.h>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "confattr/dataset.hpp"
#include "support/temp_dir.hpp"

using namespace confattr;
namespace fs = std::filesystem;

namespace {

struct Captured {
  int rc;
  std::string out;
  std::string err;
};

Captured invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "confattr");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {rc, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(testsupport::slurp(p)); }

}  // namespace

TEST_CASE("dgp writes data, roles and truth") {
  testsupport::TempDir dir;
  const auto out = dir.path() / "d";
  const auto r = invoke({"dgp", "--dgp", "curth", "--n", "300", "--seed", "0", "--out", out.string()});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("n=300 p=4") != std::string::npos);
  const auto data = testsupport::slurp(out / "data.csv");
  CHECK(data.substr(0, data.find('\n')) == "x1,x2,x3,x4,a,y");
  CHECK(fs::exists(out / "roles.csv"));
  CHECK(fs::exists(out / "truth.csv"));
  CHECK(read_json(out / "manifest.json")["schema_version"] == cli::kSchemaVersion);

  const auto c = invoke({"dgp", "--dgp", "cancellation", "--n", "5000", "--out", (dir.path() / "c").string()});
  REQUIRE(c.rc == 0);
  const auto m = read_json(dir.path() / "c" / "manifest.json");
  CHECK(m["n_treated"].get<int>() > 0);
  CHECK(m["n_control"].get<int>() > 0);
}

TEST_CASE("invalid role counts fail and name the field") {
  testsupport::TempDir dir;
  const auto cfg = dir.write("bad.json", R"({"dataset": {"kind": "curth", "params": {"n_confounders": -2}}})");
  const auto out = dir.path() / "o";
  const auto r = invoke({"dgp", "--config", cfg.string(), "--out", out.string()});
  CHECK(r.rc != 0);
  CHECK(r.err.find("n_confounders") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  const auto cfg2 = dir.write("bad2.json", R"({"dataset": {"kind": "curth", "params": {"n_confounders": 0}}})");
  const auto r2 = invoke({"dgp", "--config", cfg2.string(), "--out", out.string()});
  CHECK(r2.rc != 0);
  CHECK(r2.err.find("n_confounders") != std::string::npos);
}

TEST_CASE("attribute writes the output contract and is reproducible") {
  testsupport::TempDir dir;
  const std::vector<std::string> base = {"attribute", "--dgp", "curth", "--n", "600", "--backend", "knn"};
  auto args = base;
  args.insert(args.end(), {"--out", (dir.path() / "a").string()});
  REQUIRE(invoke(args).rc == 0);
  args = base;
  args.insert(args.end(), {"--out", (dir.path() / "b").string()});
  REQUIRE(invoke(args).rc == 0);

  const auto csv = read_csv_table(dir.path() / "a" / "attributions.csv");
  CHECK(csv.header == std::vector<std::string>{"covariate", "phi", "abs_phi", "rank"});
  REQUIRE(csv.rows.size() == 4);
  for (std::size_t r = 1; r < 4; ++r) CHECK(std::stod(csv.rows[r - 1][2]) >= std::stod(csv.rows[r][2]));
  CHECK(csv.rows[0][3] == "1");

  for (const char* f : {"attributions.csv", "coalitions.jsonl"}) {
    CHECK(testsupport::slurp(dir.path() / "a" / f) == testsupport::slurp(dir.path() / "b" / f));
  }
  auto ma = read_json(dir.path() / "a" / "manifest.json"), mb = read_json(dir.path() / "b" / "manifest.json");
  CHECK(ma["eval_count"] == 17);
  CHECK(ma["method"] == "exact");
  CHECK(ma.contains("efficiency_gap"));
  CHECK(ma.contains("wall_time_ms"));
  ma.erase("wall_time_ms");
  mb.erase("wall_time_ms");
  ma["config"].erase("output_dir");
  mb["config"].erase("output_dir");
  CHECK(ma == mb);
}

TEST_CASE("budget covering every coalition is recorded as exact fallback") {
  testsupport::TempDir dir;
  const auto out = dir.path() / "f";
  const auto r = invoke({"attribute", "--dgp", "curth", "--n", "400", "--backend", "knn", "--method", "msr",
                         "--budget", "16", "--out", out.string()});
  REQUIRE(r.rc == 0);
  const auto m = read_json(out / "manifest.json");
  CHECK(m["method"] == "exact-fallback");
  CHECK(m["eval_count"] == 17);
}

TEST_CASE("budgeted run on 17 covariates stays within 1 + B evaluations") {
  testsupport::TempDir dir;
  const auto cfg = dir.write("c.json", R"({"dataset": {"kind": "curth", "params": {"preset": "seventeen", "n": 400}},
      "backend": {"kind": "knn"}, "estimator": {"method": "regression_msr", "budget": 128}})");
  const auto out = dir.path() / "r";
  REQUIRE(invoke({"attribute", "--config", cfg.string(), "--out", out.string()}).rc == 0);
  const auto m = read_json(out / "manifest.json");
  CHECK(m["eval_count"].get<int>() <= 129);
  CHECK(m["p"] == 17);
}

TEST_CASE("failed attribution leaves no partial output") {
  testsupport::TempDir dir;
  const auto out = dir.path() / "x" / "y";
  const auto r = invoke({"attribute", "--dgp", "curth", "--n", "300", "--backend", "knn", "--method", "msr",
                         "--budget", "5", "--out", out.string()});
  CHECK(r.rc != 0);
  CHECK(r.err.find("BudgetTooSmall") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path() / "x"));
}

TEST_CASE("flags override config fields and emit-config shows the result") {
  testsupport::TempDir dir;
  const auto cfg = dir.write("c.json", R"({"dataset": {"kind": "curth"}, "estimator": {"method": "msr", "budget": 64},
      "seeds": [1, 2]})");
  const auto r = invoke({"attribute", "--config", cfg.string(), "--budget", "99", "--seed", "7", "--emit-config"});
  REQUIRE(r.rc == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["estimator"]["budget"] == 99);
  CHECK(j["estimator"]["method"] == "msr");
  CHECK(j["seeds"] == nlohmann::json::array({7}));
  CHECK(j["schema_version"] == cli::kSchemaVersion);

  CHECK(invoke({"attribute", "--dgp", "curth", "--csv", "x.csv"}).rc != 0);
  CHECK(invoke({"attribute", "--dgp", "nonsense"}).rc != 0);
  CHECK(invoke({"attribute", "--no-such-flag"}).rc == cli::kExitUsage);
}

TEST_CASE("attribute on a csv source") {
  testsupport::TempDir dir;
  REQUIRE(invoke({"dgp", "--dgp", "cancellation", "--n", "2000", "--out", (dir.path() / "d").string()}).rc == 0);
  const auto out = dir.path() / "a";
  const auto r = invoke({"attribute", "--csv", (dir.path() / "d" / "data.csv").string(), "--roles",
                         (dir.path() / "d" / "roles.csv").string(), "--out", out.string(), "--local"});
  REQUIRE(r.rc == 0);
  CHECK(fs::exists(out / "local_attributions.csv"));
  CHECK(read_json(out / "manifest.json")["eval_count"] == 5);
}

TEST_CASE("benchmark grid row count") {
  testsupport::TempDir dir;
  const auto out = dir.path() / "b";
  const auto r = invoke({"benchmark", "--dimensions", "25", "--budgets", "256", "1024", "--methods", "msr", "--n",
                         "200", "--backend", "knn", "--seed", "0", "1", "2", "--out", out.string()});
  REQUIRE(r.rc == 0);
  const auto t = read_csv_table(out / "metrics.csv");
  CHECK(t.header == std::vector<std::string>{"experiment_id", "p", "budget", "method", "seed", "metric", "value"});
  CHECK(t.rows.size() == 12);
}

TEST_CASE("metrics aggregation") {
  testsupport::TempDir dir;
  const auto a = dir.write("a.csv", "covariate,phi,abs_phi,rank\nx2,-0.9,0.9,1\nx1,0.2,0.2,2\nx10,0.1,0.1,3\n");
  std::vector<std::string> args = {"metrics", "--runs"};
  for (int i = 0; i < 10; ++i) args.push_back(a.string());
  args.insert(args.end(), {"--confounders", "x2", "--out", (dir.path() / "m").string()});
  REQUIRE(invoke(args).rc == 0);
  const auto t = read_csv_table(dir.path() / "m" / "rank_stability.csv");
  REQUIRE(t.rows.size() == 9);
  // Natural covariate order x1, x2, x10; every run agrees, so each row has one full rank.
  CHECK(t.rows[0][0] == "x1");
  CHECK(t.rows[1] == std::vector<std::string>{"x1", "2", "10", "1"});
  CHECK(t.rows[3] == std::vector<std::string>{"x2", "1", "10", "1"});
  CHECK(t.rows[8] == std::vector<std::string>{"x10", "3", "10", "1"});
  const auto m = read_csv_table(dir.path() / "m" / "metrics.csv");
  CHECK(m.rows.size() == 20);
  CHECK(std::stod(m.rows[0][6]) == doctest::Approx(0.75));

  const auto b = dir.write("b.csv", "covariate,phi,abs_phi,rank\nx1,0.2,0.2,1\nx2,0.1,0.1,2\n");
  const auto bad = invoke({"metrics", "--runs", a.string(), b.string(), "--out", (dir.path() / "n").string()});
  CHECK(bad.rc != 0);
  CHECK(bad.err.find("InconsistentWidth") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path() / "n"));
  const auto one = invoke({"metrics", "--runs", a.string(), "--out", (dir.path() / "o").string()});
  CHECK(one.err.find("MissingRuns") != std::string::npos);
}
