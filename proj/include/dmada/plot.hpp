#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dmada::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // positive x values required
  int width = 720;
  int height = 480;
};

// Self-contained line chart, one polyline per series plus axes, ticks and a
// legend. Throws ValueError on empty or ragged series.
void write_line_chart(const std::filesystem::path& path,
                      const std::vector<Series>& series,
                      const ChartOptions& opts);

// Parsed metrics.csv as produced by the trainer.
struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
  std::vector<double> values(const std::string& name) const;
};

MetricsTable read_metrics_csv(const std::filesystem::path& path);

// losses.svg (training loss terms vs epoch) and accuracy.svg (target
// accuracy and A-distance vs epoch) from one metrics.csv
void plot_metrics(const std::filesystem::path& metrics_csv,
                  const std::filesystem::path& out_dir);

// grouped accuracy-vs-weight curves on a log x axis, one series per label
void plot_sensitivity(const std::filesystem::path& path,
                      const std::vector<Series>& series,
                      const std::string& x_label);

}  // namespace dmada::plot
