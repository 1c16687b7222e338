#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "confattr/dataset.hpp"
#include "confattr/error.hpp"
#include "confattr/mask.hpp"
#include "confattr/rng.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace confattr;

TEST_CASE("mask basics") {
  const auto m = CoalitionMask::from_indices(5, {0, 3});
  CHECK(m.count() == 2);
  CHECK(m.test(0));
  CHECK_FALSE(m.test(1));
  CHECK(m.to_u64() == 0b01001U);
  CHECK(m.complement().indices() == std::vector<std::size_t>{1, 2, 4});
  CHECK(m.with(1).to_u64() == 0b01011U);
  CHECK(m.without(3).to_u64() == 0b00001U);
  CHECK(CoalitionMask::full(5).count() == 5);
  CHECK(CoalitionMask::empty(5).count() == 0);
  CHECK(m.to_hex() == "09");
  CHECK_THROWS_AS(m.test(5), Error);
}

TEST_CASE("mask hex round trip and integer order, wide widths") {
  RandomStream rng(3, stream_id("test.mask"));
  for (int t = 0; t < 300; ++t) {
    const std::size_t w = 1 + static_cast<std::size_t>(rng.below(140));
    CoalitionMask a(w), b(w);
    for (std::size_t j = 0; j < w; ++j) {
      a.set(j, rng.uniform() < 0.5);
      b.set(j, rng.uniform() < 0.5);
    }
    CHECK(CoalitionMask::from_hex(w, a.to_hex()) == a);
    CHECK(a.complement().complement() == a);
    CHECK(a.count() + a.complement().count() == w);
    if (w <= 64) {
      CHECK((a < b) == (a.to_u64() < b.to_u64()));
    } else {
      // Highest differing bit decides.
      std::size_t j = w;
      while (j > 0 && a.test(j - 1) == b.test(j - 1)) --j;
      if (j == 0) {
        CHECK(a == b);
      } else {
        CHECK((a < b) == b.test(j - 1));
      }
    }
    if (a == b) CHECK(CoalitionMaskHash{}(a) == CoalitionMaskHash{}(b));
  }
}

namespace {

Dataset tiny() {
  Eigen::MatrixXd x(4, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  Eigen::VectorXd a(4), y(4);
  a << 1, 0, 1, 0;
  y << 0.5, 1.5, 2.5, 3.5;
  return Dataset(x, a, y, {"x1", "x2", "x3"});
}

}  // namespace

TEST_CASE("subset_columns") {
  const Dataset ds = tiny();
  const auto sub = subset_columns(ds, CoalitionMask::from_bits(3, 0b101));
  REQUIRE(sub.cols() == 2);
  CHECK(sub.col(0) == ds.x().col(0));
  CHECK(sub.col(1) == ds.x().col(2));
  CHECK(subset_columns(ds, CoalitionMask::full(3)) == ds.x());
  const auto none = subset_columns(ds, CoalitionMask::empty(3));
  CHECK(none.rows() == 4);
  CHECK(none.cols() == 0);
}

TEST_CASE("dataset invariants") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd a(3);
  a << 1, 0, 2;
  CHECK_THROWS_AS(Dataset(x, a, y, {"x1"}), Error);
  a << 1, 1, 1;
  try {
    Dataset(x, a, y, {"x1"});
    FAIL("expected EmptyArm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyArm);
  }
  a << 1, 0, 1;
  CHECK_THROWS_AS(Dataset(x, a, y, {"x1", "x2"}), Error);
  const Dataset ds(x, a, y, {"x1"});
  CHECK(ds.n_treated() == 2);
  CHECK(ds.arm_rows(0) == std::vector<std::size_t>{1});
}

TEST_CASE("standardize") {
  const Dataset ds = standardize(tiny());
  for (Eigen::Index j = 0; j < 3; ++j) {
    const auto c = ds.x().col(j);
    CHECK(c.mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((c.array() - c.mean()).square().mean() == doctest::Approx(1.0));
  }
}

TEST_CASE("load_csv") {
  testsupport::TempDir dir;
  SUBCASE("well formed") {
    const auto path = dir.write("ok.csv", "x1,x2,a,y\n1,2,0,3\n4,5,1,6\n7,8,0,9\n1,1,1,1\n");
    const Dataset ds = load_csv(path, "a", "y");
    CHECK(ds.n() == 4);
    CHECK(ds.p() == 2);
    CHECK(ds.names() == std::vector<std::string>{"x1", "x2"});
    CHECK(ds.x()(1, 1) == 5.0);
  }
  SUBCASE("treatment column anywhere") {
    const auto path = dir.write("mid.csv", "y,x1,t\n1,2,0\n3,4,1\n");
    const Dataset ds = load_csv(path, "t", "y");
    CHECK(ds.p() == 1);
    CHECK(ds.y()[1] == 3.0);
  }
  SUBCASE("non-binary treatment") {
    const auto path = dir.write("bad.csv", "x1,a,y\n1,2,3\n1,0,3\n");
    try {
      load_csv(path, "a", "y");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonBinaryTreatment);
    }
  }
  SUBCASE("single arm") {
    const auto path = dir.write("arm.csv", "x1,a,y\n1,1,3\n2,1,3\n");
    try {
      load_csv(path, "a", "y");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyArm);
    }
  }
  SUBCASE("missing column and non-numeric cell") {
    const auto path = dir.write("miss.csv", "x1,a,y\n1,1,3\nfoo,0,3\n");
    try {
      load_csv(path, "treat", "y");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingColumn);
    }
    try {
      load_csv(path, "a", "y");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonNumericCell);
    }
  }
  SUBCASE("missing values rejected unless imputed") {
    const auto path = dir.write("na.csv", "x1,a,y\n1,1,3\nNA,0,3\n5,0,1\n4,1,2\n");
    CHECK_THROWS_AS(load_csv(path, "a", "y"), Error);
    const Dataset ds = load_csv(path, "a", "y", Imputation::Median);
    CHECK(ds.x()(1, 0) == 4.0);
  }
}

TEST_CASE("csv round trip is bit exact") {
  testsupport::TempDir dir;
  RandomStream rng(9, stream_id("test.csv"));
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd a(50), y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal() * 1e3;
    a[i] = static_cast<double>(i % 2);
    y[i] = rng.normal();
  }
  const Dataset ds(x, a, y, {"u", "v", "w"}, std::vector<CovariateRole>{CovariateRole::Confounder,
                                                                       CovariateRole::Noise, CovariateRole::Unknown});
  write_csv(ds, dir.path() / "d.csv");
  write_roles(ds, dir.path() / "r.csv");
  const Dataset back = load_csv(dir.path() / "d.csv", "a", "y");
  CHECK(back.x() == ds.x());
  CHECK(back.y() == ds.y());
  CHECK(back.a() == ds.a());
  const auto roles = load_roles(dir.path() / "r.csv", back.names());
  CHECK(roles == *ds.roles());
}

TEST_CASE("philox known answers") {
  using W = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random streams") {
  RandomStream a(1, stream_id("s")), b(1, stream_id("s")), c(1, stream_id("s", 1)), d(2, stream_id("s"));
  std::set<std::uint64_t> seen;
  bool differ_c = false, differ_d = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    differ_c |= va != c.next_u64();
    differ_d |= va != d.next_u64();
    seen.insert(va);
  }
  CHECK(differ_c);
  CHECK(differ_d);
  CHECK(seen.size() == 1000);

  RandomStream u(5, 0);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double v = u.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));

  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) ++hist[u.below(7)];
  for (int h : hist) CHECK(h > 800);

  // A split child is independent of how far the parent has advanced.
  RandomStream p1(4, 0), p2(4, 0);
  p2.next_u64();
  auto c1 = p1.split(3), c2 = p2.split(3);
  CHECK(c1.next_u64() == c2.next_u64());
}
