#pragma once

#include <cstddef>
#include <string_view>

namespace duetsep::simd {

/// Inner loops shared by the metrics, losses and the toy separator. Every
/// entry has a scalar reference implementation; vector variants must agree
/// with it up to floating-point reassociation.
struct KernelTable {
  std::string_view isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// sum |a - b|
  double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
  /// sum x^2
  double (*sum_squares)(const double* x, std::size_t n);
  /// out = max(x, 0)
  void (*relu)(const double* x, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the binary or the host lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Table picked once per process: AVX2 when available, unless the
/// DUETSEP_SIMD environment variable is set to "scalar".
const KernelTable& kernels();

}  // namespace duetsep::simd
