#pragma once

#include <atomic>
#include <optional>
#include <utility>
#include <vector>

#include "dmada/tensor.hpp"

namespace dmada::mixup {

// Paired source/target batch with its mixed images and labels. One lambda per
// batch; the same draw feeds pixel- and feature-level mixing.
struct MixupBatch {
  Tensor x_s;
  Tensor x_t;
  Tensor x_m;
  double lambda = 0.0;
  double l_dom_m = 0.0;  // == lambda
  std::vector<int> y_s;
};

// Class-label row [l_cls..., l_comp]; entries sum to 1.
struct ClassLabelBlock {
  std::vector<double> l_cls;
  double l_comp = 0.0;
};

enum class BlockKind { source, target, mixup };

enum class Role { mixed, source, target };

struct TripletRoles {
  Role anchor;
  Role positive;
  Role negative;
  double margin;
};

// call counters used by the trainer's no-mixup instrumentation check
struct Counters {
  std::atomic<long> pixel_mixup_calls{0};
  std::atomic<long> feature_mixup_calls{0};
};
Counters& counters();

double sample_lambda(double alpha, Rng& rng);

// x_m = lambda*x_s + (1-lambda)*x_t, soft domain label = lambda
std::pair<Tensor, double> pixel_mixup(const Tensor& x_s, const Tensor& x_t,
                                      double lambda);

// componentwise convex combination of the two latent codes
std::pair<Tensor, Tensor> feature_mixup(const Tensor& mu_s,
                                        const Tensor& sigma_s,
                                        const Tensor& mu_t,
                                        const Tensor& sigma_t, double lambda);

// per-row ratios, for the per-sample-lambda configuration
Tensor pixel_mixup_rows(const Tensor& x_s, const Tensor& x_t,
                        const std::vector<double>& lambdas);
std::pair<Tensor, Tensor> feature_mixup_rows(const Tensor& mu_s,
                                             const Tensor& sigma_s,
                                             const Tensor& mu_t,
                                             const Tensor& sigma_t,
                                             const std::vector<double>& lambdas);

ClassLabelBlock build_class_block(BlockKind kind, std::size_t k,
                                  std::optional<int> y_s = std::nullopt,
                                  std::optional<double> lambda = std::nullopt);

TripletRoles triplet_roles(double lambda);

}  // namespace dmada::mixup
