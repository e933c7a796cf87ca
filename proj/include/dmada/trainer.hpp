#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dmada/config.hpp"
#include "dmada/data.hpp"
#include "dmada/networks.hpp"

namespace dmada::trainer {

struct LossValues {
  double kl = 0.0;
  double cls_c = 0.0;
  double adv_s = 0.0;
  double adv_t = 0.0;
  double adv_m = 0.0;
  double soft_m = 0.0;
  double tri_m = 0.0;
  double cls_s_g = 0.0;
  double cls_t_g = 0.0;
  int pseudo_kept = 0;
};

struct MetricsRecord {
  int epoch = 0;
  LossValues losses;  // epoch averages
  double target_accuracy = 0.0;
  double a_distance = 0.0;
  double pseudo_kept_fraction = 0.0;
  double wall_time_seconds = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

// one lambda per batch, or one per row when per_sample_lambda is set
struct LambdaDraw {
  bool per_sample = false;
  double value = 0.0;
  std::vector<double> values;

  static LambdaDraw batch(double v) { return {false, v, {}}; }
  static LambdaDraw rows(std::vector<double> v) {
    return {true, 0.0, std::move(v)};
  }
};

struct EvalResult {
  double target_accuracy = 0.0;
  double a_distance = 0.0;
};
using EvalHook = std::function<EvalResult(const ModelSet&, int epoch)>;

struct TrainResult {
  ModelSet models;
  std::vector<MetricsRecord> metrics;
};

// One iteration of the four-stage update (D, then N_d, then C, then N_e).
LossValues train_step(ModelSet& models, const data::Batch& batch,
                      const LambdaDraw& lambda, double tau,
                      const RunConfig& cfg, Rng& z_rng);
LossValues train_step(ModelSet& models, const data::Batch& batch,
                      double lambda, double tau, const RunConfig& cfg,
                      Rng& z_rng);

// Full training loop. The hook, when set, supplies per-epoch target accuracy
// and A-distance (the trainer itself never sees target labels). When run_dir
// is non-empty, writes metrics.csv, a config snapshot and checkpoints there.
TrainResult train(data::TrainView view, const RunConfig& cfg,
                  const EvalHook& hook = {},
                  const std::filesystem::path& run_dir = {});

// Same loop with all adaptation machinery off: only N_e and C are trained,
// on the classification loss plus the weighted KL prior.
TrainResult source_only_baseline(data::TrainView view, const RunConfig& cfg,
                                 const EvalHook& hook = {},
                                 const std::filesystem::path& run_dir = {});

// cfg rewrite used by source_only_baseline; exposed for tests
RunConfig baseline_config(RunConfig cfg);

}  // namespace dmada::trainer
