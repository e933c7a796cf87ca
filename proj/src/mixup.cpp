#include "dmada/mixup.hpp"

#include <cmath>

namespace dmada::mixup {

Counters& counters() {
  static Counters c;
  return c;
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0)) {
    throw ValueError("sample_lambda: alpha must be > 0, got " +
                     std::to_string(alpha));
  }
  return rng.beta(alpha, alpha);
}

std::pair<Tensor, double> pixel_mixup(const Tensor& x_s, const Tensor& x_t,
                                      double lambda) {
  if (x_s.shape() != x_t.shape()) {
    throw ShapeError("pixel_mixup: shape mismatch " + shape_str(x_s.shape()) +
                     " vs " + shape_str(x_t.shape()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValueError("pixel_mixup: lambda out of [0,1]: " +
                     std::to_string(lambda));
  }
  counters().pixel_mixup_calls.fetch_add(1, std::memory_order_relaxed);
  Tensor x_m = add(mul_scalar(x_s, lambda), mul_scalar(x_t, 1.0 - lambda));
  return {x_m, lambda};
}

std::pair<Tensor, Tensor> feature_mixup(const Tensor& mu_s,
                                        const Tensor& sigma_s,
                                        const Tensor& mu_t,
                                        const Tensor& sigma_t, double lambda) {
  if (mu_s.shape() != mu_t.shape() || sigma_s.shape() != sigma_t.shape()) {
    throw ShapeError("feature_mixup: source/target latent shape mismatch");
  }
  counters().feature_mixup_calls.fetch_add(1, std::memory_order_relaxed);
  Tensor mu_m = add(mul_scalar(mu_s, lambda), mul_scalar(mu_t, 1.0 - lambda));
  Tensor sigma_m =
      add(mul_scalar(sigma_s, lambda), mul_scalar(sigma_t, 1.0 - lambda));
  return {mu_m, sigma_m};
}

namespace {

std::pair<Tensor, Tensor> lambda_rows(const std::vector<double>& lambdas) {
  std::vector<double> lam = lambdas, om(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0 && lambdas[i] <= 1.0))
      throw ValueError("mixup: lambda out of [0,1]: " +
                       std::to_string(lambdas[i]));
    om[i] = 1.0 - lambdas[i];
  }
  const std::size_t n = lambdas.size();
  return {Tensor::from({n}, std::move(lam)), Tensor::from({n}, std::move(om))};
}

}  // namespace

Tensor pixel_mixup_rows(const Tensor& x_s, const Tensor& x_t,
                        const std::vector<double>& lambdas) {
  if (x_s.shape() != x_t.shape())
    throw ShapeError("pixel_mixup_rows: shape mismatch " +
                     shape_str(x_s.shape()) + " vs " + shape_str(x_t.shape()));
  if (lambdas.size() != x_s.rows())
    throw ShapeError("pixel_mixup_rows: lambda count mismatch");
  counters().pixel_mixup_calls.fetch_add(1, std::memory_order_relaxed);
  auto [lam, om] = lambda_rows(lambdas);
  return add(scale_rows(x_s, lam), scale_rows(x_t, om));
}

std::pair<Tensor, Tensor> feature_mixup_rows(const Tensor& mu_s,
                                             const Tensor& sigma_s,
                                             const Tensor& mu_t,
                                             const Tensor& sigma_t,
                                             const std::vector<double>& lambdas) {
  if (mu_s.shape() != mu_t.shape() || sigma_s.shape() != sigma_t.shape())
    throw ShapeError("feature_mixup_rows: latent shape mismatch");
  counters().feature_mixup_calls.fetch_add(1, std::memory_order_relaxed);
  auto [lam, om] = lambda_rows(lambdas);
  Tensor mu_m = add(scale_rows(mu_s, lam), scale_rows(mu_t, om));
  Tensor sigma_m = add(scale_rows(sigma_s, lam), scale_rows(sigma_t, om));
  return {mu_m, sigma_m};
}

ClassLabelBlock build_class_block(BlockKind kind, std::size_t k,
                                  std::optional<int> y_s,
                                  std::optional<double> lambda) {
  ClassLabelBlock block;
  block.l_cls.assign(k, 0.0);
  switch (kind) {
    case BlockKind::source: {
      if (!y_s) throw ValueError("build_class_block: source kind needs y_s");
      if (*y_s < 0 || static_cast<std::size_t>(*y_s) >= k)
        throw ValueError("build_class_block: label " + std::to_string(*y_s) +
                         " out of [0," + std::to_string(k) + ")");
      block.l_cls[*y_s] = 1.0;
      block.l_comp = 0.0;
      break;
    }
    case BlockKind::target: {
      block.l_comp = 1.0;
      break;
    }
    case BlockKind::mixup: {
      if (!y_s) throw ValueError("build_class_block: mixup kind needs y_s");
      if (!lambda) throw ValueError("build_class_block: mixup kind needs lambda");
      if (*y_s < 0 || static_cast<std::size_t>(*y_s) >= k)
        throw ValueError("build_class_block: label " + std::to_string(*y_s) +
                         " out of [0," + std::to_string(k) + ")");
      block.l_cls[*y_s] = *lambda;
      block.l_comp = 1.0 - *lambda;
      break;
    }
  }
  return block;
}

TripletRoles triplet_roles(double lambda) {
  TripletRoles r;
  r.anchor = Role::mixed;
  if (lambda >= 0.5) {
    r.positive = Role::source;
    r.negative = Role::target;
  } else {
    r.positive = Role::target;
    r.negative = Role::source;
  }
  r.margin = std::abs(2.0 * lambda - 1.0);
  return r;
}

}  // namespace dmada::mixup
