#include <doctest.h>

#include <cmath>
#include <set>

#include "confattr/error.hpp"
#include "confattr/shapley.hpp"
#include "support/generators.hpp"

using namespace confattr;

namespace {

double binom(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

EstimatorConfig budgeted(Method m, std::size_t budget, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.method = m;
  cfg.budget = budget;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("shapley weights sum to one") {
  for (std::size_t p = 1; p <= 30; ++p) {
    double total = 0.0;
    for (std::size_t s = 0; s < p; ++s) total += binom(p - 1, s) * shapley_weight(p, s);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("exact Shapley on closed-form games") {
  RandomStream rng(1, stream_id("test.exact"));
  for (std::size_t p = 1; p <= 9; ++p) {
    std::vector<double> w(p);
    for (auto& v : w) v = testgen::uniform(rng, -2, 2);
    auto add = testgen::table_game(testgen::additive_table(w, 0.7), p);
    const auto att = exact_shapley(add);
    for (std::size_t j = 0; j < p; ++j) CHECK(att.phi[static_cast<Eigen::Index>(j)] == doctest::Approx(w[j]));
    CHECK(att.base_value == doctest::Approx(0.7));
    CHECK(std::abs(att.efficiency_gap) <= 1e-12);

    FunctionGame card(p, [](const CoalitionMask& m) { return static_cast<double>(m.count()); });
    const auto c = exact_shapley(card);
    CHECK((c.phi.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(card.calls() == (std::size_t{1} << p));
  }
}

TEST_CASE("table form agrees with the game form") {
  RandomStream rng(2, stream_id("test.table"));
  for (int t = 0; t < 30; ++t) {
    const std::size_t p = static_cast<std::size_t>(testgen::between(rng, 1, 10));
    const auto v = testgen::random_table(rng, p);
    auto g = testgen::table_game(v, p);
    CHECK((exact_shapley(g).phi - exact_shapley_from_table(v, p)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("exact enumeration refuses large p") {
  FunctionGame g(30, [](const CoalitionMask&) { return 0.0; });
  EstimatorConfig cfg;
  cfg.max_exact_players = 25;
  try {
    exact_shapley(g, cfg);
    FAIL("expected DimensionTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionTooLarge);
  }
}

TEST_CASE("budget floor and full-enumeration fallback") {
  FunctionGame g(6, [](const CoalitionMask& m) { return static_cast<double>(m.count()); });
  for (auto m : {Method::MSR, Method::KernelSHAP, Method::RegressionMSR}) {
    try {
      estimate(g, budgeted(m, 13, 0));
      FAIL("expected BudgetTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BudgetTooSmall);
    }
    const auto att = estimate(g, budgeted(m, 14, 0));
    CHECK_FALSE(att.exact_fallback);
    CHECK(att.budget_used == 14);
    const auto full = estimate(g, budgeted(m, 64, 0));
    CHECK(full.exact_fallback);
    CHECK(full.budget_used == 64);
  }
}

TEST_CASE("sampling plan") {
  RandomStream rng(3, stream_id("test.plan"));
  for (int t = 0; t < 40; ++t) {
    const std::size_t p = static_cast<std::size_t>(testgen::between(rng, 3, 40));
    const std::size_t budget = 2 * p + 2 + static_cast<std::size_t>(rng.below(200));
    for (bool paired : {false, true}) {
      const auto plan = sample_coalitions(p, budget, 9, paired);
      const std::size_t cap = p < 20 ? std::min<std::size_t>(budget, std::size_t{1} << p) : budget;
      CHECK(plan.size() == cap);
      CHECK(plan[0] == CoalitionMask::empty(p));
      CHECK(plan[1] == CoalitionMask::full(p));
      CHECK(std::set<CoalitionMask>(plan.begin(), plan.end()).size() == plan.size());
      if (paired) {
        for (std::size_t i = 2; i + 1 < plan.size(); i += 2) CHECK(plan[i + 1] == plan[i].complement());
      }
      // A larger budget extends the same draw sequence.
      const auto longer = sample_coalitions(p, budget + 10, 9, paired);
      const std::size_t common = paired ? plan.size() - plan.size() % 2 : plan.size();
      CHECK(std::equal(plan.begin(), plan.begin() + static_cast<std::ptrdiff_t>(common), longer.begin()));
    }
  }
}

TEST_CASE("budgeted estimators query each coalition once") {
  RandomStream rng(4, stream_id("test.calls"));
  const auto v = testgen::random_table(rng, 9);
  for (auto m : {Method::MSR, Method::KernelSHAP, Method::RegressionMSR}) {
    auto g = testgen::table_game(v, 9);
    const auto att = estimate(g, budgeted(m, 100, 5));
    CHECK(g.calls() == att.budget_used);
    CHECK(att.budget_used <= 100);
  }
}

TEST_CASE("estimators are deterministic in the seed") {
  RandomStream rng(5, stream_id("test.seed"));
  const auto v = testgen::random_table(rng, 10);
  for (auto m : {Method::MSR, Method::KernelSHAP, Method::RegressionMSR}) {
    auto g = testgen::table_game(v, 10);
    const auto a = estimate(g, budgeted(m, 200, 1));
    const auto b = estimate(g, budgeted(m, 200, 1));
    const auto c = estimate(g, budgeted(m, 200, 2));
    CHECK(a.phi == b.phi);
    CHECK(a.phi != c.phi);
  }
}

TEST_CASE("proxy-based estimators are exact on additive games at any budget") {
  RandomStream rng(6, stream_id("test.additive"));
  for (int t = 0; t < 25; ++t) {
    const std::size_t p = static_cast<std::size_t>(testgen::between(rng, 3, 16));
    std::vector<double> w(p);
    for (auto& x : w) x = testgen::uniform(rng, -3, 3);
    const auto table = testgen::additive_table(w, testgen::uniform(rng, -1, 1));
    const std::size_t budget = 2 * p + 2 + static_cast<std::size_t>(rng.below(60));
    for (auto m : {Method::KernelSHAP, Method::RegressionMSR}) {
      auto g = testgen::table_game(table, p);
      const auto att = estimate(g, budgeted(m, budget, static_cast<std::uint64_t>(t)));
      for (std::size_t j = 0; j < p; ++j) {
        CHECK(att.phi[static_cast<Eigen::Index>(j)] == doctest::Approx(w[j]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("efficiency of the constrained estimators") {
  RandomStream rng(7, stream_id("test.efficiency"));
  for (int t = 0; t < 25; ++t) {
    const std::size_t p = static_cast<std::size_t>(testgen::between(rng, 3, 14));
    const auto table = testgen::random_table(rng, p, 5.0);
    const std::size_t budget = 2 * p + 2 + static_cast<std::size_t>(rng.below(100));
    for (auto m : {Method::KernelSHAP, Method::RegressionMSR}) {
      auto g = testgen::table_game(table, p);
      const auto att = estimate(g, budgeted(m, budget, static_cast<std::uint64_t>(t)));
      CHECK(std::abs(att.phi.sum() - (table.back() - table.front())) <= 1e-10);
      CHECK(std::abs(att.efficiency_gap) <= 1e-10);
    }
  }
}

TEST_CASE("MSR error shrinks with budget on average") {
  RandomStream rng(8, stream_id("test.msr"));
  double err_small = 0.0, err_large = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t p = 10;
    const auto table = testgen::random_table(rng, p);
    auto g = testgen::table_game(table, p);
    const Eigen::VectorXd exact = exact_shapley_from_table(table, p);
    err_small += (msr_estimate(g, budgeted(Method::MSR, 60, t)).phi - exact).norm();
    err_large += (msr_estimate(g, budgeted(Method::MSR, 900, t)).phi - exact).norm();
  }
  CHECK(err_large < err_small);
}

TEST_CASE("local attributions are efficient per unit") {
  const std::size_t p = 3, n = 5;
  // Local game: nu_x(S) = sum_{j in S} x_j * j, with a per-unit base.
  class LocalGame final : public CoalitionGame {
   public:
    std::size_t players() const override { return 3; }
    double value(const CoalitionMask& m) override { return local_values(m).mean(); }
    bool has_local_values() const override { return true; }
    Eigen::VectorXd local_values(const CoalitionMask& m) override {
      Eigen::VectorXd v(5);
      for (Eigen::Index i = 0; i < 5; ++i) {
        v[i] = static_cast<double>(i);
        for (auto j : m.indices()) v[i] += static_cast<double>((i + 1) * (j + 1));
      }
      return v;
    }
  } game;
  EstimatorConfig cfg;
  cfg.local = true;
  const auto att = exact_shapley(game, cfg);
  REQUIRE(att.local_phi);
  CHECK(att.local_phi->rows() == static_cast<Eigen::Index>(n));
  CHECK(att.local_phi->cols() == static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) CHECK((*att.local_phi)(i, j) == doctest::Approx((i + 1) * (j + 1)));
  }
  CHECK((att.local_phi->colwise().mean().transpose() - att.phi).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("method names round trip") {
  for (auto m : {Method::Exact, Method::MSR, Method::KernelSHAP, Method::RegressionMSR}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("permutation"), Error);
}
