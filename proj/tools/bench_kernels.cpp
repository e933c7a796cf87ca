// Times the serial reference kernels against the OpenMP variants and checks
// that both produce identical bits.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "dmada/kernels.hpp"
#include "dmada/rng.hpp"

using namespace dmada;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool identical(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

int main() {
  Rng rng(12345);
  std::printf("%8s %12s %12s %8s %6s\n", "size", "serial(ms)", "openmp(ms)",
              "speedup", "match");
  bool all_match = true;
  for (std::size_t n : {32, 64, 128, 256, 512}) {
    std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    int reps = n <= 128 ? 20 : 5;
    double ts = time_ms(reps, [&] {
      kernels::matmul_serial(a.data(), b.data(), c1.data(), n, n, n);
    });
    double tp = time_ms(reps, [&] {
      kernels::matmul(a.data(), b.data(), c2.data(), n, n, n);
    });
    bool ok = identical(c1, c2);
    all_match = all_match && ok;
    std::printf("%8zu %12.3f %12.3f %7.2fx %6s\n", n, ts, tp, ts / tp,
                ok ? "yes" : "NO");
  }
  return all_match ? 0 : 1;
}
