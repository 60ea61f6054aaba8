#pragma once

// Dense double-precision reductions used in the inner loops of the solvers
// (coordinate descent, boosting residual updates, score averaging).
//
// Every kernel has a scalar reference implementation. Vector variants are
// compiled in separate translation units with their own ISA flags and picked
// once per process from CPUID (x86) or the target (aarch64). Set
// UMLR_ISA=scalar in the environment to pin the reference path.

#include <cstddef>
#include <span>

namespace umlr::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

const char* isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*sum_sq)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Table chosen for this process.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
inline double sum_sq(std::span<const double> a) { return active().sum_sq(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  return active().sq_dist(a.data(), b.data(), a.size());
}

namespace detail {
const KernelTable* make_avx2_table();
const KernelTable* make_neon_table();
}  // namespace detail

}  // namespace umlr::kernels
