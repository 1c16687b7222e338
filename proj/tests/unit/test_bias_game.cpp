#include <doctest.h>

#include <fstream>
#include <string>

#include <json.hpp>

#include "confattr/bias_game.hpp"
#include "confattr/dgp.hpp"
#include "confattr/error.hpp"
#include "confattr/shapley.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace confattr;

namespace {

CoalitionMask m2(std::uint64_t bits) { return CoalitionMask::from_bits(2, bits); }

// Discrete observational data with a known cell structure.
Dataset discrete_data(std::uint64_t seed, std::size_t n, double effect) {
  RandomStream rng(seed, stream_id("test.discrete"));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd a(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = static_cast<double>(rng.below(3));
    const double e = logistic(0.8 * (x(i, 0) - 1.0) - 0.5 * (x(i, 1) - 1.0));
    a[i] = rng.uniform() < e ? 1.0 : 0.0;
    y[i] = x(i, 0) + 0.5 * x(i, 2) + a[i] * (effect + x(i, 1)) + 0.3 * rng.normal();
  }
  a[0] = 1.0;
  a[1] = 0.0;
  return Dataset(x, a, y, {"x1", "x2", "x3"});
}

}  // namespace

TEST_CASE("cancellation population values") {
  BiasGame game(cancellation_population(300), RegressionBackend::exact_cell_mean());
  CHECK(game.value(m2(0b01)) == doctest::Approx(-2233.0 / 23370.0).epsilon(1e-13));
  CHECK(game.value(m2(0b10)) == doctest::Approx(-9775.0 / 29328.0).epsilon(1e-13));
  CHECK(std::abs(game.value(m2(0b00))) <= 1e-13);
  CHECK(game.value(m2(0b11)) == 0.0);

  CHECK(game.pseudo().tau_hat.cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(game.observational_contrast(m2(0)).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(game.observational_contrast(m2(0b11)).cwiseAbs().maxCoeff() <= 1e-13);

  const auto& ds = game.dataset();
  const Eigen::VectorXd d1 = game.observational_contrast(m2(0b01));
  const Eigen::VectorXd l2 = game.local_values(m2(0b10));
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (ds.x()(r, 0) == 0.0) CHECK(d1[r] == doctest::Approx(45.0 / 779.0).epsilon(1e-13));
    if (ds.x()(r, 1) == 1.0) CHECK(l2[r] == doctest::Approx(-5.0 / 24.0).epsilon(1e-13));
  }
  for (std::uint64_t b = 0; b < 4; ++b) CHECK(game.cate_projection(m2(b)).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("exact Shapley on the cancellation population") {
  BiasGame game(cancellation_population(30), RegressionBackend::exact_cell_mean());
  const auto att = exact_shapley(game);
  const double phi1 = 0.5 * (-2233.0 / 23370.0 + 9775.0 / 29328.0);
  CHECK(att.phi[0] == doctest::Approx(phi1).epsilon(1e-12));
  CHECK(att.phi[1] == doctest::Approx(-phi1).epsilon(1e-12));
  CHECK(std::abs(att.phi.sum()) <= 1e-13);
  CHECK(game.eval_count() == 5);
}

TEST_CASE("randomized trial with a constant effect") {
  RandomStream rng(2, stream_id("test.rct"));
  const Eigen::Index n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd a(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i % 4);
    x(i, 1) = static_cast<double>((i / 4) % 2);
    a[i] = static_cast<double>((i / 8) % 2);
    y[i] = 2.0 * x(i, 0) - x(i, 1) + 1.5 * a[i];
  }
  BiasGame game(Dataset(x, a, y, {"x1", "x2"}), RegressionBackend::exact_cell_mean());
  CHECK((game.pseudo().tau_hat.array() - 1.5).abs().maxCoeff() <= 1e-12);
  CHECK(game.pseudo().tau_bar == doctest::Approx(1.5));
}

TEST_CASE("semi-synthetic with no prognostic signal recovers the effect") {
  const auto cov = simulate_actg_like_covariates(800, 1);
  SemiSynthSpec spec = SemiSynthSpec::actg(1);
  std::fill(spec.beta.begin(), spec.beta.end(), 0.0);
  spec.sigma = 0.0;
  BiasGame game(generate_semisynth(cov.x, spec, cov.names), RegressionBackend::knn());
  CHECK((game.pseudo().tau_hat.array() - spec.tau).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("global value equals the mean of local values under exact cell means") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BiasGame game(discrete_data(seed, 500, 1.0), RegressionBackend::exact_cell_mean());
    CHECK(game.value(CoalitionMask::full(3)) == 0.0);
    for (std::uint64_t b = 0; b < 8; ++b) {
      const auto mask = CoalitionMask::from_bits(3, b);
      const double mean_local = game.local_values(mask).mean();
      CHECK(std::abs(mean_local - game.value(mask)) <= 1e-12);
      const Eigen::VectorXd g = game.cate_projection(mask);
      CHECK(std::abs(g.mean() - game.pseudo().tau_bar) <= 1e-12);
    }
    CHECK(game.cate_projection(CoalitionMask::empty(3)).isConstant(game.pseudo().tau_bar));
    CHECK((game.cate_projection(CoalitionMask::full(3)) - game.pseudo().tau_hat).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("evaluation counter, cache hits and log") {
  BiasGame game(discrete_data(1, 300, 0.5), RegressionBackend::exact_cell_mean());
  CHECK(game.eval_count() == 1);
  const std::vector<CoalitionMask> batch = {CoalitionMask::from_bits(3, 1), CoalitionMask::from_bits(3, 2),
                                            CoalitionMask::from_bits(3, 1), CoalitionMask::from_bits(3, 4)};
  const auto v = game.values(batch);
  CHECK(v[0] == v[2]);
  CHECK(game.eval_count() == 4);
  CHECK(game.cache_hits() == 1);
  game.value(CoalitionMask::from_bits(3, 2));
  CHECK(game.eval_count() == 4);
  CHECK(game.cache_hits() == 2);

  const auto log = game.log();
  REQUIRE(log.size() == 3);
  CHECK(log[0].mask < log[1].mask);
  CHECK(log[1].n_cache_hits == 1);

  testsupport::TempDir dir;
  game.write_log(dir.path() / "c.jsonl");
  std::ifstream in(dir.path() / "c.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("mask_bits_hex"));
    CHECK(j.contains("global_value"));
    CHECK(j.contains("n_cache_hits"));
    ++lines;
  }
  CHECK(lines == 3);
}

TEST_CASE("batch evaluation is independent of the thread count") {
  const Dataset ds = generate_curth(CurthDgpSpec::four(600, 3));
  std::vector<CoalitionMask> all;
  for (std::uint64_t b = 0; b < 16; ++b) all.push_back(CoalitionMask::from_bits(4, b));
  GameOptions one{ValueMode::Signed, 0, 1}, four{ValueMode::Signed, 0, 4};
  BiasGame g1(ds, RegressionBackend::knn(), one), g4(ds, RegressionBackend::knn(), four);
  const auto v1 = g1.values(all);
  const auto v4 = g4.values(all);
  CHECK(v1 == v4);
  BiasGame seq(ds, RegressionBackend::knn(), one);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(seq.value(all[i]) == v1[i]);
}

TEST_CASE("value modes") {
  const Dataset ds = discrete_data(4, 400, 1.0);
  BiasGame s(ds, RegressionBackend::exact_cell_mean());
  BiasGame a(ds, RegressionBackend::exact_cell_mean(), {ValueMode::Absolute, 0, 0});
  BiasGame q(ds, RegressionBackend::exact_cell_mean(), {ValueMode::Squared, 0, 0});
  for (std::uint64_t b = 0; b < 8; ++b) {
    const auto m = CoalitionMask::from_bits(3, b);
    const double v = s.value(m);
    CHECK(a.value(m) == -std::abs(v));
    CHECK(q.value(m) == doctest::Approx(-v * v));
    CHECK(a.local_values(m).maxCoeff() <= 0.0);
  }
  for (auto mode : {ValueMode::Signed, ValueMode::Absolute, ValueMode::Squared}) {
    CHECK(value_mode_from_string(to_string(mode)) == mode);
  }
}

TEST_CASE("cross-fitting keeps the full coalition at zero") {
  BiasGame game(generate_curth(CurthDgpSpec::four(500, 1)), RegressionBackend::knn(), {ValueMode::Signed, 3, 0});
  CHECK(game.value(CoalitionMask::full(4)) == 0.0);
  CHECK(std::isfinite(game.value(CoalitionMask::empty(4))));
}

TEST_CASE("mask width is checked") {
  BiasGame game(discrete_data(1, 200, 0.0), RegressionBackend::exact_cell_mean());
  CHECK_THROWS_AS(game.value(CoalitionMask::full(4)), Error);
}

TEST_CASE("an unused proxy of the confounder still receives attribution") {
  BiasGame game(generate_proxy_confounder(3000, 0.5, 0), RegressionBackend::boosted_stumps());
  const auto att = exact_shapley(game);
  MESSAGE("proxy attributions " << att.phi.transpose());
  CHECK(std::abs(att.phi[2]) > 0.05);
}

TEST_CASE("the shared prognostic term cancels in the true effect") {
  const Dataset ds = generate_cancelling_confounder(2000, 3);
  const auto& t = *ds.truth();
  for (Eigen::Index i = 0; i < 2000; ++i) {
    const double m = ds.x()(i, 2);
    CHECK(t.tau[i] == doctest::Approx(1.0 + 3.0 * m * m));
  }
}
