// SPDX-License-Identifier: Apache-2.0
#include "chimera/kernels.hpp"

#include <algorithm>

namespace chimera::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void gemm_nt_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot_scalar(row, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + v : v;
    }
  }
}

void gemm_nn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      axpy_scalar(a[i * k + p], b + p * n, c + i * n, n);
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      axpy_scalar(a[p * m + i], b + p * n, c + i * n, n);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Isa::Scalar,    dot_scalar,     axpy_scalar,
                             add_scalar,     mul_scalar,     gemm_nt_scalar,
                             gemm_nn_scalar, gemm_tn_scalar};
  return t;
}

}  // namespace chimera::kernels::detail
