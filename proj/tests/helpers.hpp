#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dmada/rng.hpp"
#include "dmada/tensor.hpp"

namespace dmada::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false,
                            double scale = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * scale;
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Central finite differences of a scalar-valued rebuild against the analytic
// gradient of `param`. `rebuild` must construct a fresh graph from the
// current parameter values each call.
struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// The denominator floor keeps round-off noise on near-zero gradients from
// registering as relative error: central differences of an O(1) loss carry
// ~eps/h of absolute noise regardless of the gradient's size.
inline double rel_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

inline GradCheck check_gradients(Tensor& param,
                                 const std::function<Tensor()>& rebuild,
                                 double h = 1e-5) {
  if (param.has_grad()) param.zero_grad();
  Tensor loss = rebuild();
  loss.backward();
  const std::vector<double> analytic = param.grad();

  GradCheck out;
  auto& vals = param.mutable_values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double keep = vals[i];
    vals[i] = keep + h;
    const double up = rebuild().item();
    vals[i] = keep - h;
    const double down = rebuild().item();
    vals[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    out.max_rel_error = std::max(out.max_rel_error,
                                 rel_error(analytic[i], numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace dmada::testing
