#include <doctest.h>

#include <cstring>
#include <vector>

#include "confattr/dgp.hpp"
#include "confattr/error.hpp"
#include "confattr/kernels.hpp"
#include "confattr/regression.hpp"
#include "support/generators.hpp"

using namespace confattr;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Variant {
  kernels::Isa isa;
  void (*sqdiff)(const double*, double, double*, std::size_t);
  void (*affine)(const double*, double, double, double*, std::size_t);
  void (*subtract)(const double*, const double*, double*, std::size_t);
};

std::vector<Variant> simd_variants() {
  std::vector<Variant> out;
  if (kernels::isa_supported(kernels::Isa::Avx2)) {
    out.push_back({kernels::Isa::Avx2, kernels::avx2::accumulate_squared_diff, kernels::avx2::affine,
                   kernels::avx2::subtract});
  }
  if (kernels::isa_supported(kernels::Isa::Neon)) {
    out.push_back({kernels::Isa::Neon, kernels::neon::accumulate_squared_diff, kernels::neon::affine,
                   kernels::neon::subtract});
  }
  return out;
}

}  // namespace

TEST_CASE("simd kernels match the scalar reference bit for bit") {
  RandomStream rng(17, stream_id("test.kernels"));
  const auto variants = simd_variants();
  if (variants.empty()) MESSAGE("no SIMD variant on this machine; scalar only");
  for (std::size_t n = 0; n < 70; ++n) {
    for (std::size_t offset = 0; offset < 3; ++offset) {
      std::vector<double> col(n + offset), rhs(n + offset), acc0(n + offset);
      for (std::size_t i = 0; i < col.size(); ++i) {
        col[i] = rng.normal() * 10.0;
        rhs[i] = rng.normal();
        acc0[i] = rng.uniform();
      }
      const double q = rng.normal(), shift = rng.normal(), scale = rng.uniform() * 3.0;
      std::vector<double> ref_acc = acc0, ref_aff(col.size()), ref_sub(col.size());
      kernels::scalar::accumulate_squared_diff(col.data() + offset, q, ref_acc.data() + offset, n);
      kernels::scalar::affine(col.data() + offset, shift, scale, ref_aff.data() + offset, n);
      kernels::scalar::subtract(col.data() + offset, rhs.data() + offset, ref_sub.data() + offset, n);
      for (const auto& v : variants) {
        std::vector<double> acc = acc0, aff(col.size()), sub(col.size());
        v.sqdiff(col.data() + offset, q, acc.data() + offset, n);
        v.affine(col.data() + offset, shift, scale, aff.data() + offset, n);
        v.subtract(col.data() + offset, rhs.data() + offset, sub.data() + offset, n);
        CHECK(same_bits(acc, ref_acc));
        CHECK(same_bits(aff, ref_aff));
        CHECK(same_bits(sub, ref_sub));
      }
    }
  }
}

TEST_CASE("dispatch can be forced to scalar and back") {
  const auto original = kernels::active_isa();
  CHECK(kernels::set_isa(kernels::Isa::Scalar));
  CHECK(kernels::active_isa() == kernels::Isa::Scalar);
  CHECK(kernels::set_isa(original));
}

TEST_CASE("knn predictions do not depend on the kernel variant") {
  const Dataset ds = generate_curth(CurthDgpSpec::four(400, 5));
  const auto original = kernels::active_isa();
  std::vector<std::vector<double>> preds;
  for (auto isa : {kernels::Isa::Scalar, kernels::Isa::Avx2, kernels::Isa::Neon}) {
    if (!kernels::set_isa(isa)) continue;
    const auto model = fit(RegressionBackend::knn(7), ds.x(), ds.y());
    const Eigen::VectorXd p = model.predict(ds.x().topRows(100));
    preds.emplace_back(p.data(), p.data() + p.size());
  }
  kernels::set_isa(original);
  for (const auto& p : preds) CHECK(same_bits(p, preds.front()));
}

TEST_CASE("zero-width fits are the training mean") {
  const Eigen::MatrixXd x(3, 0);
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  for (auto b : {RegressionBackend::exact_cell_mean(), RegressionBackend::knn(), RegressionBackend::tree(6, 1),
                 RegressionBackend::boosted_stumps(), RegressionBackend{}}) {
    const auto model = fit(b, x, y);
    const Eigen::VectorXd p = model.predict(Eigen::MatrixXd(2, 0));
    CHECK(p[0] == 2.0);
    CHECK(p[1] == 2.0);
  }
}

TEST_CASE("exact cell means recover the cancellation outcome table") {
  const Dataset ds = cancellation_population(60);
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<Eigen::Index> rows;
    for (auto r : ds.arm_rows(arm)) rows.push_back(static_cast<Eigen::Index>(r));
    const Eigen::MatrixXd xa = ds.x()(rows, Eigen::placeholders::all);
    const auto model = fit(RegressionBackend::exact_cell_mean(), xa, ds.y()(rows));
    CHECK(model.kind() == BackendKind::ExactCellMean);
    const Eigen::VectorXd p = model.predict(ds.x());
    CHECK((p - ds.truth()->mu1).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("exact cell mean interpolates and falls back to the global mean") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 0, 1, 1, 0;
  Eigen::VectorXd y(3);
  y << 1, 2, 6;
  const auto model = fit(RegressionBackend::exact_cell_mean(), x, y);
  CHECK(model.predict(x) == y);
  Eigen::MatrixXd unseen(1, 2);
  unseen << 1, 1;
  CHECK(model.predict(unseen)[0] == 3.0);
  Eigen::MatrixXd wide(1, 3);
  CHECK_THROWS_AS(model.predict(wide), Error);
}

TEST_CASE("exact cell mean refuses continuous columns") {
  const Dataset ds = generate_curth(CurthDgpSpec::four(200, 1));
  try {
    fit(RegressionBackend::exact_cell_mean(), ds.x(), ds.y());
    FAIL("expected CellCardinalityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CellCardinalityExceeded);
  }
}

TEST_CASE("auto backend resolution") {
  const Dataset cont = generate_curth(CurthDgpSpec::four(200, 1));
  CHECK(fit(RegressionBackend{}, cont.x(), cont.y()).kind() == BackendKind::Knn);
  const Dataset disc = cancellation_population(30);
  CHECK(fit(RegressionBackend{}, disc.x(), disc.y()).kind() == BackendKind::ExactCellMean);
}

TEST_CASE("knn degenerate cases") {
  const Dataset ds = generate_curth(CurthDgpSpec::four(50, 2));
  const auto all = fit(RegressionBackend::knn(50), ds.x(), ds.y());
  const Eigen::VectorXd p = all.predict(ds.x());
  CHECK((p.array() - ds.y().mean()).abs().maxCoeff() <= 1e-12);
  const auto one = fit(RegressionBackend::knn(1), ds.x(), ds.y());
  CHECK(one.predict(ds.x()) == ds.y());
}

TEST_CASE("tree recovers a step function") {
  Eigen::MatrixXd x(100, 1);
  Eigen::VectorXd y(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i < 37 ? -1.0 : 4.0;
  }
  const auto model = fit(RegressionBackend::tree(3, 5), x, y);
  CHECK((model.predict(x) - y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("boosted stumps fit an additive signal and are deterministic") {
  RandomStream rng(8, stream_id("test.boost"));
  Eigen::MatrixXd x(600, 3);
  Eigen::VectorXd y(600);
  for (Eigen::Index i = 0; i < 600; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y[i] = x(i, 0) * x(i, 0) + (x(i, 1) > 0 ? 1.0 : -1.0);
  }
  const auto b = RegressionBackend::boosted_stumps(300, 0.2, 10);
  const auto m1 = fit(b, x, y), m2 = fit(b, x, y);
  const Eigen::VectorXd p = m1.predict(x);
  CHECK(p == m2.predict(x));
  const double mse = (p - y).squaredNorm() / 600.0;
  const double var = (y.array() - y.mean()).square().mean();
  CHECK(mse < 0.1 * var);

  // Too few rows for a split leaves the constant mean.
  const auto small = fit(RegressionBackend::boosted_stumps(50, 0.2, 20), x.topRows(30), y.head(30));
  CHECK((small.predict(x.topRows(5)).array() - y.head(30).mean()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("backend names round trip") {
  for (auto k : {BackendKind::Auto, BackendKind::ExactCellMean, BackendKind::Knn, BackendKind::PiecewiseConstantTree,
                 BackendKind::BoostedStumps}) {
    CHECK(backend_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(backend_kind_from_string("xgboost"), Error);
}
