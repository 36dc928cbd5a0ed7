// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "chimera/kernels.hpp"

namespace chimera::kernels {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("CHIMERA_ISA")) {
    const std::string want = env;
    if (want == "scalar") return &table(Isa::Scalar);
    if (want == "avx2") return &table(Isa::Avx2);
    if (want == "neon") return &table(Isa::Neon);
    throw std::invalid_argument("CHIMERA_ISA: unknown value '" + want + "'");
  }
  if (supported(Isa::Avx2)) return &table(Isa::Avx2);
  if (supported(Isa::Neon)) return &table(Isa::Neon);
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{pick_default()};
  return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(CHIMERA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(CHIMERA_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(CHIMERA_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_table();
#endif
#if defined(CHIMERA_HAVE_NEON)
    case Isa::Neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace chimera::kernels
