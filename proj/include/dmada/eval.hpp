#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmada/data.hpp"
#include "dmada/trainer.hpp"

namespace dmada::eval {

// Fraction of argmax-correct predictions of C(N_e(x)); ties break toward the
// lowest class index.
double target_accuracy(const ModelSet& models,
                       const data::LabeledDataset& target_test);

std::vector<int> predict(const ModelSet& models, const Tensor& images);

// [mu, sigma] features of a dataset, [N x 2*d_z], outside the tape
Tensor extract_features(const ModelSet& models, const Tensor& images);

// Proxy A-distance: train a logistic linear probe to separate the two
// feature sets (50/50 train/test split, 500 full-batch gradient steps,
// lr 0.1, L2 1e-3); epsilon = test error; returns clamp(2(1-2*eps), 0, 2).
double a_distance(const Tensor& feat_s, const Tensor& feat_t);

void export_embeddings(const ModelSet& models,
                       const std::vector<data::LabeledDataset>& datasets,
                       const std::filesystem::path& path);

// ---- experiment wiring (the only place target labels meet the trainer) ----

// Builds the domain pair described by [data]: synthetic moons or digits from
// the config seed, or IDX files from the configured paths.
data::DomainPair make_task(const RunConfig& cfg);

// Eval hook computing target accuracy and A-distance on the pair; feature
// sets for the probe are capped at `probe_cap` rows per domain.
trainer::EvalHook make_eval_hook(const data::DomainPair& pair,
                                 std::size_t probe_cap = 500);

trainer::TrainResult run_experiment(const data::DomainPair& pair,
                                    const RunConfig& cfg,
                                    const std::filesystem::path& run_dir = {},
                                    bool source_only = false);

// ---- ablation grid ----

struct ToggleCombo {
  bool adversarial = true;  // false: source-only baseline run
  bool pixel_mixup = false;
  bool feature_mixup = false;
  bool triplet = false;
  bool d_cls_branch = true;
  bool pseudo_labels = true;
  std::string name() const;
  RunConfig apply(RunConfig cfg) const;
};

struct AblationSpec {
  std::vector<ToggleCombo> combos;
  std::vector<std::uint64_t> seeds;
};

struct AblationRow {
  std::string combination;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_a_distance = 0.0;
};

struct AblationCell {
  std::string combination;
  std::uint64_t seed;
  double accuracy;
  double a_distance;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;
};

AblationTable run_ablation(const data::DomainPair& pair,
                           const AblationSpec& spec, const RunConfig& cfg,
                           const std::filesystem::path& out_dir = {});

}  // namespace dmada::eval
