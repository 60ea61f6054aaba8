#include "doctest.h"

#include <cmath>
#include <random>

#include "umlr/core.hpp"

using namespace umlr;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("center_outcome") {
  auto c = center_outcome(vec({1, 2, 3}));
  CHECK(c.mean == doctest::Approx(2.0));
  CHECK(c.centered[0] == doctest::Approx(-1.0));
  CHECK(c.centered[1] == doctest::Approx(0.0));
  CHECK(c.centered[2] == doctest::Approx(1.0));

  c = center_outcome(vec({0, 0}));
  CHECK(c.mean == 0.0);
  CHECK(c.centered.isZero());

  c = center_outcome(vec({5}));
  CHECK(c.mean == 5.0);
  CHECK(c.centered[0] == 0.0);

  CHECK_THROWS_AS(center_outcome(Vector()), Error);
}

TEST_CASE("center then de-center is the identity") {
  const Vector y = vec({1e6 + 0.25, -3.5, 17.0, 2.0e-3, 42.0});
  const auto c = center_outcome(y);
  CHECK(std::abs(mean(c.centered)) <= 1e-12 * y.cwiseAbs().maxCoeff());
  const Vector back = c.centered.array() + c.mean;
  CHECK((back - y).cwiseAbs().maxCoeff() <= 1e-12 * y.cwiseAbs().maxCoeff());
}

TEST_CASE("partition_by_mean") {
  auto s = partition_by_mean(vec({1, 2, 3}));
  CHECK(s.r1 == std::vector<Index>{0, 1});
  CHECK(s.r2 == std::vector<Index>{2});

  s = partition_by_mean(vec({-1, 1}));
  CHECK(s.r1 == std::vector<Index>{0});
  CHECK(s.r2 == std::vector<Index>{1});

  try {
    partition_by_mean(vec({4, 4, 4}));
    FAIL("expected degenerate partition");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegeneratePartition);
  }
}

TEST_CASE("partition_by_mean always yields a valid split") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 50);
    Vector y(n);
    for (Index i = 0; i < n; ++i) y[i] = std::round(3.0 * normal(rng));
    if (y.maxCoeff() == y.minCoeff()) continue;
    const auto s = partition_by_mean(y);
    CHECK_NOTHROW(validate_split(s, n));
    const double m = mean(y);
    for (Index i : s.r1) CHECK(y[i] <= m);
    for (Index i : s.r2) CHECK(y[i] > m);
  }
}

TEST_CASE("dataset validation") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXi t(3);
  t << 0, 1, 2;
  try {
    Dataset d(x, t, vec({1, 2, 3}));
    FAIL("expected invalid treatment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidInput);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  t << 0, 1, 1;
  Dataset d(x, t, vec({1, 2, 3}));
  CHECK(d.n_treated() == 2);
  CHECK(d.arm_indices(0) == std::vector<Index>{0});
  CHECK_THROWS_AS(d.require_arms(2), Error);
  x(1, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset(x, t, vec({1, 2, 3})), Error);
}
