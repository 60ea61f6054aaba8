#include "umlr/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace umlr::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double sum_sq_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

const KernelTable kScalar{Isa::kScalar, dot_scalar, sum_scalar, sum_sq_scalar, axpy_scalar,
                          sq_dist_scalar};

const KernelTable& select() {
  const char* forced = std::getenv("UMLR_ISA");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return kScalar;
  if (const auto* t = avx2_table()) return *t;
  if (const auto* t = neon_table()) return *t;
  return kScalar;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
  static const KernelTable* table = detail::make_avx2_table();
  return table;
}

const KernelTable* neon_table() {
  static const KernelTable* table = detail::make_neon_table();
  return table;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace umlr::kernels
