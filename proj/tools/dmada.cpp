#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmada/eval.hpp"
#include "dmada/plot.hpp"

namespace fs = std::filesystem;
using namespace dmada;

namespace {

fs::path output_root() {
  const char* env = std::getenv("DMADA_OUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg =
      config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  for (const auto& o : overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg,
                    const data::DomainPair& pair) {
  std::ostringstream os;
  os << "task=" << cfg.task << "\n"
     << "transform=" << (cfg.task == "digits" ? cfg.transform : "none") << "\n"
     << "seed=" << cfg.seed << "\n"
     << "n_source=" << pair.source.size() << "\n"
     << "n_target=" << pair.target.size() << "\n"
     << "num_classes=" << pair.num_classes << "\n";
  if (cfg.task == "moons")
    os << "noise=" << cfg.noise << "\nshift_degrees=" << cfg.shift << "\n";
  std::ofstream out(dir / "manifest.txt");
  out << os.str();
  if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
}

int cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  if (cfg.task == "idx")
    throw ValueError("gen-data: task must be moons or digits");
  data::DomainPair pair = eval::make_task(cfg);
  fs::create_directories(out_dir);
  data::save_idx(pair.source, out_dir / "source-images.idx",
                 out_dir / "source-labels.idx");
  data::save_idx(pair.target, out_dir / "target-images.idx",
                 out_dir / "target-labels.idx");
  write_manifest(out_dir, cfg, pair);
  std::cout << "wrote " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& run_dir,
              bool source_only) {
  data::DomainPair pair = eval::make_task(cfg);
  trainer::TrainResult res =
      eval::run_experiment(pair, cfg, run_dir, source_only);
  const auto& last = res.metrics.back();
  std::cout << "final target_accuracy=" << last.target_accuracy
            << " a_distance=" << last.a_distance << "\n"
            << "run directory: " << run_dir.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& run_dir) {
  RunConfig cfg = RunConfig::from_file(run_dir / "config.cfg");
  ModelSet models = ModelSet::load_checkpoint(run_dir / "checkpoint.bin");
  data::DomainPair pair = eval::make_task(cfg);
  trainer::EvalResult r = eval::make_eval_hook(pair)(models, 0);
  std::cout << "target_accuracy=" << r.target_accuracy << "\n"
            << "a_distance=" << r.a_distance << "\n";
  return 0;
}

int cmd_export(const fs::path& run_dir, const fs::path& out) {
  RunConfig cfg = RunConfig::from_file(run_dir / "config.cfg");
  ModelSet models = ModelSet::load_checkpoint(run_dir / "checkpoint.bin");
  data::DomainPair pair = eval::make_task(cfg);
  data::LabeledDataset target_unlabeled = pair.target;
  target_unlabeled.labels.clear();  // exported target rows stay label-free
  eval::export_embeddings(models, {pair.source, target_unlabeled}, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const fs::path& out_dir,
               const std::vector<std::uint64_t>& seeds) {
  data::DomainPair pair = eval::make_task(cfg);
  eval::AblationSpec spec;
  spec.combos = {
      {false, false, false, false, false, false},         // source only
      {true, false, true, false, true, true},             // feature mixup
      {true, true, true, false, true, true},              // + pixel mixup
      {true, true, true, true, true, true},               // full
  };
  spec.seeds = seeds;
  eval::AblationTable table = eval::run_ablation(pair, spec, cfg, out_dir);
  for (const auto& r : table.rows)
    std::cout << r.combination << ": accuracy " << r.mean_accuracy << " +- "
              << r.std_accuracy << ", a_distance " << r.mean_a_distance
              << "\n";
  return 0;
}

double snapshot_value(const fs::path& run_dir, const std::string& key) {
  RunConfig cfg = RunConfig::from_file(run_dir / "config.cfg");
  if (key == "omega") return cfg.omega;
  if (key == "phi") return cfg.phi;
  throw ValueError("plot: sweep parameter must be omega or phi");
}

int cmd_plot(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
             const std::string& sweep) {
  if (sweep.empty()) {
    if (run_dirs.size() != 1)
      throw ValueError("plot: exactly one --run without --sweep");
    plot::plot_metrics(run_dirs[0] / "metrics.csv", out_dir);
    std::cout << "wrote " << (out_dir / "losses.svg").string() << " and "
              << (out_dir / "accuracy.svg").string() << "\n";
    return 0;
  }
  if (run_dirs.size() < 2)
    throw ValueError("plot: sweep mode needs at least two --run directories");
  plot::Series s;
  s.label = "final accuracy";
  for (const auto& dir : run_dirs) {
    plot::MetricsTable t = plot::read_metrics_csv(dir / "metrics.csv");
    s.x.push_back(snapshot_value(dir, sweep));
    s.y.push_back(t.values("target_accuracy").back());
  }
  fs::create_directories(out_dir);
  fs::path out = out_dir / ("sensitivity_" + sweep + ".svg");
  plot::plot_sensitivity(out, {s}, sweep);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(static_cast<std::uint64_t>(std::stoull(cell)));
  if (out.empty()) throw ValueError("ablate: empty seed list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial domain adaptation with domain mixup"};
  app.require_subcommand(1);

  std::string config_path, seeds_csv = "1,2,3", sweep;
  std::vector<std::string> overrides;
  std::vector<std::string> run_dirs;
  std::string out_dir;
  bool source_only = false;

  auto add_cfg = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file");
    sub->add_option("--set", overrides,
                    "override, key=value or section.key=value");
  };

  auto* gen = app.add_subcommand("gen-data", "write IDX dataset files");
  add_cfg(gen);
  gen->add_option("--out", out_dir, "output directory");

  auto* train = app.add_subcommand("train", "run the training loop");
  add_cfg(train);
  train->add_option("--out", out_dir, "run directory");
  train->add_flag("--source-only", source_only, "train the baseline instead");

  auto* evalc = app.add_subcommand("eval", "re-evaluate a finished run");
  evalc->add_option("--run", run_dirs, "run directory")->required();

  auto* ablate = app.add_subcommand("ablate", "toggle-combination sweep");
  add_cfg(ablate);
  ablate->add_option("--out", out_dir, "output directory");
  ablate->add_option("--seeds", seeds_csv, "comma-separated seeds");

  auto* exp = app.add_subcommand("export-embeddings",
                                 "latent features of a finished run as CSV");
  exp->add_option("--run", run_dirs, "run directory")->required();
  exp->add_option("--out", out_dir, "output CSV path");

  auto* plotc = app.add_subcommand("plot", "emit SVG charts from metrics");
  plotc->add_option("--run", run_dirs, "run directory (repeatable)")
      ->required();
  plotc->add_option("--out", out_dir, "output directory");
  plotc->add_option("--sweep", sweep, "sensitivity sweep over omega or phi");

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    fs::path out =
        out_dir.empty() ? output_root() / sub->get_name() : fs::path(out_dir);
    std::vector<fs::path> runs(run_dirs.begin(), run_dirs.end());
    if (sub == gen) return cmd_gen_data(load_config(config_path, overrides),
                                        out);
    if (sub == train)
      return cmd_train(load_config(config_path, overrides), out, source_only);
    if (sub == evalc) return cmd_eval(runs.front());
    if (sub == ablate)
      return cmd_ablate(load_config(config_path, overrides), out,
                        parse_seeds(seeds_csv));
    if (sub == exp)
      return cmd_export(runs.front(), out_dir.empty()
                                          ? runs.front() / "embeddings.csv"
                                          : fs::path(out_dir));
    if (sub == plotc) return cmd_plot(runs, out, sweep);
    throw ValueError("unknown subcommand");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
