#include "dmada/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dmada/errors.hpp"

namespace dmada::plot {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
                          "#bcbd22", "#e377c2"};
constexpr int kPaletteSize = 10;

struct Range {
  double lo, hi;
};

Range pad(Range r) {
  if (r.hi <= r.lo) {
    r.lo -= 0.5;
    r.hi += 0.5;
  } else {
    double m = 0.05 * (r.hi - r.lo);
    r.lo -= m;
    r.hi += m;
  }
  return r;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::vector<Series>& series,
                      const ChartOptions& opts) {
  if (series.empty()) throw ValueError("write_line_chart: no series");
  for (const auto& s : series) {
    if (s.x.empty())
      throw ValueError("write_line_chart: series '" + s.label + "' is empty");
    if (s.x.size() != s.y.size())
      throw ValueError("write_line_chart: series '" + s.label + "' has " +
                       std::to_string(s.x.size()) + " x values and " +
                       std::to_string(s.y.size()) + " y values");
    if (opts.log_x)
      for (double x : s.x)
        if (!(x > 0.0))
          throw ValueError(
              "write_line_chart: log x axis needs positive x, got " + num(x));
  }

  auto xmap = [&opts](double x) { return opts.log_x ? std::log10(x) : x; };
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& s : series) {
    for (double x : s.x) {
      xr.lo = std::min(xr.lo, xmap(x));
      xr.hi = std::max(xr.hi, xmap(x));
    }
    for (double y : s.y) {
      yr.lo = std::min(yr.lo, y);
      yr.hi = std::max(yr.hi, y);
    }
  }
  xr = pad(xr);
  yr = pad(yr);

  const double ml = 64, mr = 150, mt = 40, mb = 48;
  const double pw = opts.width - ml - mr, ph = opts.height - mt - mb;
  auto px = [&](double x) {
    return ml + (xmap(x) - xr.lo) / (xr.hi - xr.lo) * pw;
  };
  auto py = [&](double y) {
    return mt + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph;
  };

  std::ofstream out(path);
  if (!out) throw IoError("write_line_chart: cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width
      << "\" height=\"" << opts.height << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opts.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << escape(opts.title) << "</text>\n";

  // frame
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // ticks: 5 per axis at plot-coordinate intervals
  for (int i = 0; i <= 5; ++i) {
    double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    double sx = ml + pw * i / 5.0;
    double sy = mt + ph - ph * i / 5.0;
    double xv = opts.log_x ? std::pow(10.0, fx) : fx;
    out << "<line x1=\"" << sx << "\" y1=\"" << mt + ph << "\" x2=\"" << sx
        << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << sx << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy << "\" x2=\"" << ml
        << "\" y2=\"" << sy << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << sy + 4
        << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opts.height - 10
      << "\" text-anchor=\"middle\">" << escape(opts.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << escape(opts.y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    out << "\"/>\n";
    double ly = mt + 14 + 18.0 * static_cast<double>(si);
    out << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\""
        << ml + pw + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + pw + 35 << "\" y=\"" << ly + 4 << "\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write_line_chart: write failed on " +
                          path.string());
}

std::size_t MetricsTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw ValueError("metrics table has no column '" + name + "'");
}

std::vector<double> MetricsTable::values(const std::string& name) const {
  std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_metrics_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw IoError("read_metrics_csv: " + path.string() + " has no header");
  MetricsTable table;
  std::stringstream hdr(line);
  std::string cell;
  while (std::getline(hdr, cell, ',')) table.columns.push_back(cell);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw IoError("read_metrics_csv: " + path.string() + ":" +
                      std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() != table.columns.size())
      throw IoError("read_metrics_csv: " + path.string() + ":" +
                    std::to_string(line_no) + ": " +
                    std::to_string(vals.size()) + " fields, expected " +
                    std::to_string(table.columns.size()));
    table.rows.push_back(std::move(vals));
  }
  if (table.rows.empty())
    throw IoError("read_metrics_csv: " + path.string() + " has no data rows");
  return table;
}

void plot_metrics(const std::filesystem::path& metrics_csv,
                  const std::filesystem::path& out_dir) {
  MetricsTable t = read_metrics_csv(metrics_csv);
  std::filesystem::create_directories(out_dir);
  std::vector<double> epochs = t.values("epoch");

  std::vector<Series> losses;
  for (const char* name : {"kl", "cls_c", "adv_s", "adv_t", "adv_m", "soft_m",
                           "tri_m", "cls_s_g", "cls_t_g"})
    losses.push_back({name, epochs, t.values(name)});
  ChartOptions lo;
  lo.title = "Training loss terms";
  lo.x_label = "epoch";
  lo.y_label = "loss";
  write_line_chart(out_dir / "losses.svg", losses, lo);

  std::vector<Series> acc{
      {"target accuracy", epochs, t.values("target_accuracy")},
      {"A-distance", epochs, t.values("a_distance")}};
  ChartOptions ao;
  ao.title = "Adaptation progress";
  ao.x_label = "epoch";
  ao.y_label = "value";
  write_line_chart(out_dir / "accuracy.svg", acc, ao);
}

void plot_sensitivity(const std::filesystem::path& path,
                      const std::vector<Series>& series,
                      const std::string& x_label) {
  ChartOptions o;
  o.title = "Loss weight sensitivity";
  o.x_label = x_label;
  o.y_label = "target accuracy";
  o.log_x = true;
  write_line_chart(path, series, o);
}

}  // namespace dmada::plot
