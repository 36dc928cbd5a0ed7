// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense double-precision kernels used by the autodiff engine.
//
// Every kernel has a scalar reference implementation. Vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled into separate
// translation units and picked at runtime from the CPU feature bits. The
// environment variable CHIMERA_ISA=scalar|avx2|neon overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace chimera::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

// Raw-pointer table. Matrices are row-major and densely packed.
struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // c[m,n] (+)= a[m,k] * b[n,k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k, bool accumulate);
  // c[m,n] (+)= a[m,k] * b[k,n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k, bool accumulate);
  // c[m,n] (+)= a[k,m]^T * b[k,n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k, bool accumulate);
};

bool supported(Isa isa);

// Table for a specific ISA. Throws std::invalid_argument when the ISA is not
// compiled in or not supported by the running CPU.
const KernelTable& table(Isa isa);

// The table selected for this process.
const KernelTable& active();

// Replace the process-wide selection. Not thread-safe with concurrent kernel
// calls; intended for tests and tools at startup.
void select(Isa isa);

// Span conveniences over the active table.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace detail {
const KernelTable& scalar_table();
#if defined(CHIMERA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(CHIMERA_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace chimera::kernels
