#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "dmada/kernels.hpp"
#include "dmada/rng.hpp"

using namespace dmada;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// independent triple loop, deliberately written differently from the library
std::vector<double> naive_matmul(const std::vector<double>& a,
                                 const std::vector<double>& b, std::size_t r,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(r * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < r; ++i) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

}  // namespace

TEST_CASE("matmul matches a 2x2 hand computation") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
  kernels::matmul_serial(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("serial matmul agrees with an independent evaluation") {
  Rng rng(11);
  for (auto [r, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{
                             3, 5, 7},
                         {1, 9, 1},
                         {16, 4, 32}}) {
    auto a = random_vec(r * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<double> c(r * n);
    kernels::matmul_serial(a.data(), b.data(), c.data(), r, k, n);
    auto expect = naive_matmul(a, b, r, k, n);
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial references") {
  Rng rng(22);
  for (std::size_t n : {5, 33, 150, 200}) {
    auto a = random_vec(n * n, rng);
    auto b = random_vec(n * n, rng);
    std::vector<double> c1(n * n), c2(n * n);

    kernels::matmul_serial(a.data(), b.data(), c1.data(), n, n, n);
    kernels::matmul(a.data(), b.data(), c2.data(), n, n, n);
    CHECK(c1 == c2);

    c1 = random_vec(n * n, rng);
    c2 = c1;
    kernels::matmul_nt_acc_serial(a.data(), b.data(), c1.data(), n, n, n);
    kernels::matmul_nt_acc(a.data(), b.data(), c2.data(), n, n, n);
    CHECK(c1 == c2);

    c1 = random_vec(n * n, rng);
    c2 = c1;
    kernels::matmul_tn_acc_serial(a.data(), b.data(), c1.data(), n, n, n);
    kernels::matmul_tn_acc(a.data(), b.data(), c2.data(), n, n, n);
    CHECK(c1 == c2);
  }
}

TEST_CASE("transpose variants accumulate into the output") {
  Rng rng(33);
  const std::size_t r = 4, n = 6, k = 3;
  auto a = random_vec(r * n, rng);  // [r x n]
  auto b = random_vec(k * n, rng);  // b used as [k x n], we need b^T [n x k]
  std::vector<double> base = random_vec(r * k, rng);

  // a * b^T via naive matmul on an explicitly transposed copy
  std::vector<double> bt(n * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
  auto prod = naive_matmul(a, bt, r, n, k);

  std::vector<double> c = base;
  kernels::matmul_nt_acc_serial(a.data(), b.data(), c.data(), r, n, k);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(base[i] + prod[i]).epsilon(1e-12));
}

TEST_CASE("tn variant computes a^T * b with accumulation") {
  Rng rng(44);
  const std::size_t r = 5, k = 3, n = 4;
  auto a = random_vec(r * k, rng);  // [r x k]
  auto b = random_vec(r * n, rng);  // [r x n]
  std::vector<double> at(k * r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) at[j * r + i] = a[i * k + j];
  auto prod = naive_matmul(at, b, k, r, n);

  std::vector<double> c(k * n, 0.5);
  kernels::matmul_tn_acc_serial(a.data(), b.data(), c.data(), r, k, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(0.5 + prod[i]).epsilon(1e-12));
}
