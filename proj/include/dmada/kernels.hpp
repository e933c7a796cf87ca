#pragma once

#include <cstddef>

// Dense row-major kernels. Each function has a serial reference used by the
// tests and an OpenMP variant used by the library. The parallel versions
// assign one output element to exactly one thread with a fixed inner-loop
// order, so results are bit-identical to the serial versions at any thread
// count.

namespace dmada::kernels {

// c[r x n] = a[r x k] * b[k x n]
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t k, std::size_t n);
void matmul(const double* a, const double* b, double* c,
            std::size_t r, std::size_t k, std::size_t n);

// c[r x k] += a[r x n] * b^T[n x k]   (i.e. a * transpose(b))
void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t r, std::size_t n, std::size_t k);
void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t n, std::size_t k);

// c[k x n] += a^T[k x r] * b[r x n]   (i.e. transpose(a) * b)
void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t r, std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t r, std::size_t k, std::size_t n);

template <class F>
void map_serial(const double* in, double* out, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) out[i] = f(in[i]);
}

}  // namespace dmada::kernels
