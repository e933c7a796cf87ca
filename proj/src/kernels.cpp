#include "dmada/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmada::kernels {

namespace {
// Below this many output elements the parallel dispatch costs more than the
// loop itself.
constexpr std::ptrdiff_t kParallelCutoff = 16 * 1024;
}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul(const double* a, const double* b, double* c,
            std::size_t r, std::size_t k, std::size_t n) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(r);
#pragma omp parallel for schedule(static) \
    if (rows * static_cast<std::ptrdiff_t>(n * k) > kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t r, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      c[i * k + j] += acc;
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t n, std::size_t k) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(r);
#pragma omp parallel for schedule(static) \
    if (rows * static_cast<std::ptrdiff_t>(n * k) > kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      c[i * k + j] += acc;
    }
  }
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < r; ++p) acc += a[p * k + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t k, std::size_t n) {
  const std::ptrdiff_t ik = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) \
    if (ik * static_cast<std::ptrdiff_t>(r * n) > kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < ik; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < r; ++p) acc += a[p * k + i] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

}  // namespace dmada::kernels
