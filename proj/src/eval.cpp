#include "dmada/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dmada::eval {

namespace {

// probe hyperparameters, fixed so reported distances are comparable
constexpr int kProbeSteps = 500;
constexpr double kProbeLr = 0.1;
constexpr double kProbeL2 = 1e-3;
constexpr std::size_t kProbeMinRows = 20;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> predict(const ModelSet& models, const Tensor& images) {
  LatentCode code = models.encoder(images);
  Tensor logits = models.classifier(code);
  const std::size_t b = logits.rows(), k = logits.cols();
  std::vector<int> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double target_accuracy(const ModelSet& models,
                       const data::LabeledDataset& target_test) {
  if (target_test.size() == 0)
    throw ValueError("target_accuracy: empty dataset");
  if (!target_test.has_labels())
    throw ValueError("target_accuracy: dataset '" + target_test.name +
                     "' has no labels");
  std::vector<int> pred = predict(models, target_test.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == target_test.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

Tensor extract_features(const ModelSet& models, const Tensor& images) {
  LatentCode code = models.encoder(images);
  const std::size_t b = images.rows();
  const std::size_t d = code.mu.cols();
  std::vector<double> v(b * 2 * d);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      v[i * 2 * d + j] = code.mu.at(i, j);
      v[i * 2 * d + d + j] = code.sigma.at(i, j);
    }
  }
  return Tensor::from({b, 2 * d}, std::move(v));
}

double a_distance(const Tensor& feat_s, const Tensor& feat_t) {
  if (feat_s.cols() != feat_t.cols())
    throw ShapeError("a_distance: feature widths differ, " +
                     std::to_string(feat_s.cols()) + " vs " +
                     std::to_string(feat_t.cols()));
  const std::size_t ns = feat_s.rows(), nt = feat_t.rows();
  if (ns < kProbeMinRows || nt < kProbeMinRows)
    throw ValueError("a_distance: need at least " +
                     std::to_string(kProbeMinRows) + " rows per domain");
  const std::size_t d = feat_s.cols();

  // deterministic 50/50 split: even rows train the probe, odd rows score it
  struct Split {
    std::vector<double> x;
    std::vector<int> y;
  } train, test;
  auto push = [d](Split& dst, const Tensor& feat, std::size_t row, int label) {
    for (std::size_t j = 0; j < d; ++j) dst.x.push_back(feat.at(row, j));
    dst.y.push_back(label);
  };
  for (std::size_t i = 0; i < ns; ++i)
    push(i % 2 == 0 ? train : test, feat_s, i, 0);
  for (std::size_t i = 0; i < nt; ++i)
    push(i % 2 == 0 ? train : test, feat_t, i, 1);

  const std::size_t n_train = train.y.size();
  std::vector<double> w(d, 0.0);
  double bias = 0.0;
  std::vector<double> gw(d);
  for (int step = 0; step < kProbeSteps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) {
      const double* xi = &train.x[i * d];
      double z = bias;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * xi[j];
      double p = 1.0 / (1.0 + std::exp(-z));
      double err = p - static_cast<double>(train.y[i]);
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * xi[j];
      gb += err;
    }
    const double scale = 1.0 / static_cast<double>(n_train);
    for (std::size_t j = 0; j < d; ++j)
      w[j] -= kProbeLr * (gw[j] * scale + kProbeL2 * w[j]);
    bias -= kProbeLr * gb * scale;
  }

  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.y.size(); ++i) {
    const double* xi = &test.x[i * d];
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += w[j] * xi[j];
    if ((z > 0.0 ? 1 : 0) != test.y[i]) ++wrong;
  }
  double eps = static_cast<double>(wrong) / static_cast<double>(test.y.size());
  return std::clamp(2.0 * (1.0 - 2.0 * eps), 0.0, 2.0);
}

void export_embeddings(const ModelSet& models,
                       const std::vector<data::LabeledDataset>& datasets,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("export_embeddings: cannot open " + path.string());
  const std::size_t width = 2 * models.dims.d_z;
  out << "domain,label";
  for (std::size_t j = 0; j < width; ++j) out << ",f" << j;
  out << "\n";
  for (const auto& ds : datasets) {
    Tensor feat = extract_features(models, ds.images);
    for (std::size_t i = 0; i < feat.rows(); ++i) {
      out << ds.name << ',' << (ds.has_labels() ? ds.labels[i] : -1);
      for (std::size_t j = 0; j < width; ++j)
        out << ',' << fmt(feat.at(i, j));
      out << "\n";
    }
  }
  if (!out) throw IoError("export_embeddings: write failed on " +
                          path.string());
}

data::DomainPair make_task(const RunConfig& cfg) {
  if (cfg.task == "moons") {
    return data::make_moons_pair(cfg.n_source, cfg.noise, cfg.shift, cfg.seed);
  }
  if (cfg.task == "digits") {
    data::Transform t = data::parse_transform(cfg.transform);
    return data::make_digits_pair(cfg.n_source, cfg.n_target, cfg.side, t,
                                  cfg.seed);
  }
  if (cfg.task == "idx") {
    data::DomainPair pair;
    pair.source = data::load_idx(cfg.source_images, cfg.source_labels);
    pair.target = data::load_idx(cfg.target_images, cfg.target_labels);
    int max_label = -1;
    for (int y : pair.source.labels) max_label = std::max(max_label, y);
    if (max_label < 1)
      throw ValueError("make_task: source labels span fewer than 2 classes");
    pair.num_classes = static_cast<std::size_t>(max_label) + 1;
    return pair;
  }
  throw ValueError("make_task: unknown task '" + cfg.task + "'");
}

trainer::EvalHook make_eval_hook(const data::DomainPair& pair,
                                 std::size_t probe_cap) {
  const data::DomainPair* p = &pair;
  return [p, probe_cap](const ModelSet& models, int) {
    trainer::EvalResult r;
    r.target_accuracy = target_accuracy(models, p->target);
    auto cap = [probe_cap](const Tensor& images) {
      std::size_t n = std::min(images.rows(), probe_cap);
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      return gather_rows(images, idx);
    };
    Tensor fs = extract_features(models, cap(p->source.images));
    Tensor ft = extract_features(models, cap(p->target.images));
    r.a_distance = a_distance(fs, ft);
    return r;
  };
}

trainer::TrainResult run_experiment(const data::DomainPair& pair,
                                    const RunConfig& cfg,
                                    const std::filesystem::path& run_dir,
                                    bool source_only) {
  trainer::EvalHook hook = make_eval_hook(pair);
  data::TrainView view = data::train_view(pair);
  if (source_only)
    return trainer::source_only_baseline(view, cfg, hook, run_dir);
  return trainer::train(view, cfg, hook, run_dir);
}

std::string ToggleCombo::name() const {
  if (!adversarial) return "source_only";
  std::string out;
  auto tag = [&out](bool on, const char* t) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += t;
  };
  tag(pixel_mixup, "pm");
  tag(feature_mixup, "fm");
  tag(triplet, "tri");
  tag(d_cls_branch, "dcls");
  tag(pseudo_labels, "pl");
  return out.empty() ? "adv_only" : out;
}

RunConfig ToggleCombo::apply(RunConfig cfg) const {
  if (!adversarial) return trainer::baseline_config(cfg);
  cfg.pixel_mixup = pixel_mixup;
  cfg.feature_mixup = feature_mixup;
  cfg.triplet = triplet;
  cfg.d_cls_branch = d_cls_branch;
  cfg.pseudo_labels = pseudo_labels;
  return cfg;
}

AblationTable run_ablation(const data::DomainPair& pair,
                           const AblationSpec& spec, const RunConfig& cfg,
                           const std::filesystem::path& out_dir) {
  if (spec.combos.empty() || spec.seeds.empty())
    throw ValueError("run_ablation: empty combo or seed list");
  AblationTable table;
  for (const auto& combo : spec.combos) {
    RunConfig base = combo.apply(cfg);
    std::vector<double> accs, dists;
    for (std::uint64_t seed : spec.seeds) {
      RunConfig run_cfg = base;
      run_cfg.seed = seed;
      bool source_only = !combo.adversarial;
      trainer::TrainResult res =
          run_experiment(pair, run_cfg, {}, source_only);
      const auto& last = res.metrics.back();
      table.cells.push_back(
          {combo.name(), seed, last.target_accuracy, last.a_distance});
      accs.push_back(last.target_accuracy);
      dists.push_back(last.a_distance);
    }
    AblationRow row;
    row.combination = combo.name();
    const double n = static_cast<double>(accs.size());
    row.mean_accuracy =
        std::accumulate(accs.begin(), accs.end(), 0.0) / n;
    row.mean_a_distance =
        std::accumulate(dists.begin(), dists.end(), 0.0) / n;
    double var = 0.0;
    for (double a : accs) var += (a - row.mean_accuracy) * (a - row.mean_accuracy);
    row.std_accuracy = std::sqrt(var / n);
    table.rows.push_back(row);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream cells(out_dir / "ablation_cells.csv");
    cells << "combination,seed,accuracy,a_distance\n";
    for (const auto& c : table.cells)
      cells << c.combination << ',' << c.seed << ',' << fmt(c.accuracy) << ','
            << fmt(c.a_distance) << "\n";
    std::ofstream rows(out_dir / "ablation_summary.csv");
    rows << "combination,mean_accuracy,std_accuracy,mean_a_distance\n";
    for (const auto& r : table.rows)
      rows << r.combination << ',' << fmt(r.mean_accuracy) << ','
           << fmt(r.std_accuracy) << ',' << fmt(r.mean_a_distance) << "\n";
    if (!cells || !rows)
      throw IoError("run_ablation: write failed in " + out_dir.string());
  }
  return table;
}

}  // namespace dmada::eval
