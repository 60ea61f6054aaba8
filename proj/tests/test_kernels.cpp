#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "umlr/kernels.hpp"

using namespace umlr::kernels;

namespace {

std::vector<double> draw(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

void check_equivalent(const KernelTable& ref, const KernelTable& alt) {
  std::mt19937_64 rng(1234);
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 64, 100, 1001}) {
    const auto a = draw(rng, n);
    const auto b = draw(rng, n);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    const double tol = 1e-14 * (mag + 1.0);
    CHECK(std::abs(alt.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);
    CHECK(std::abs(alt.sum(a.data(), n) - ref.sum(a.data(), n)) <= 1e-14 * (n + 1.0) * 4.0);
    CHECK(std::abs(alt.sum_sq(a.data(), n) - ref.sum_sq(a.data(), n)) <= 1e-14 * (n + 1.0) * 4.0);
    CHECK(std::abs(alt.sq_dist(a.data(), b.data(), n) - ref.sq_dist(a.data(), b.data(), n)) <=
          1e-14 * (n + 1.0) * 8.0);
    auto y1 = b;
    auto y2 = b;
    ref.axpy(-0.75, a.data(), y1.data(), n);
    alt.axpy(-0.75, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y1[i]) + 1.0));
  }
}

}  // namespace

TEST_CASE("scalar reference kernels") {
  const auto& k = scalar_table();
  const double a[] = {1, 2, 3};
  const double b[] = {4, 5, 6};
  CHECK(k.dot(a, b, 3) == 32.0);
  CHECK(k.sum(a, 3) == 6.0);
  CHECK(k.sum_sq(a, 3) == 14.0);
  CHECK(k.sq_dist(a, b, 3) == 27.0);
  double y[] = {1, 1, 1};
  k.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
}

TEST_CASE("vector kernels match the scalar reference") {
  if (const KernelTable* t = avx2_table()) {
    CHECK(t->isa == Isa::kAvx2);
    check_equivalent(scalar_table(), *t);
  }
  if (const KernelTable* t = neon_table()) {
    CHECK(t->isa == Isa::kNeon);
    check_equivalent(scalar_table(), *t);
  }
  const auto& act = active();
  MESSAGE("active kernels: " << std::string(isa_name(act.isa)));
  check_equivalent(scalar_table(), act);
}
