#include "pidflow/app/output.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "pidflow/errors.hpp"

namespace pidflow::app {

namespace {

std::string provenance_line(const Provenance& p) {
  std::string line = "# pidflow config_hash=" + p.config_hash;
  line += " seed=" + (p.seed ? std::to_string(*p.seed) : std::string("none"));
  if (!p.run_name.empty()) line += " run=" + p.run_name;
  return line + "\n";
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) parts.push_back(cell);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

std::string metrics_csv(const MetricsSeries& series, const Provenance& provenance,
                        const std::optional<std::string>& truncation) {
  std::string out = provenance_line(provenance);
  if (series.absolute_error) out += "# relative_error holds absolute error (run started at the optimum)\n";
  out += kMetricsHeader;
  out += '\n';
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", series.times[k],
                       series.relative_error[k], series.consensus_error[k],
                       series.optimality_residual[k], series.lambda_sum_drift[k]);
  }
  if (truncation) out += "# truncated: " + *truncation + "\n";
  return out;
}

std::string trajectory_csv(const Trajectory& trajectory, const Provenance& provenance,
                           const std::optional<std::string>& truncation) {
  const StateLayout& layout = trajectory.layout;
  std::string out = provenance_line(provenance);
  out += "time";
  const char* parts[] = {"x", "lambda", "v"};
  const int part_count = layout.has_velocity ? 3 : 2;
  for (int p = 0; p < part_count; ++p) {
    for (int i = 1; i <= layout.n_agents; ++i) {
      for (int k = 1; k <= layout.dim; ++k) out += fmt::format(",{}_{}_{}", parts[p], i, k);
    }
  }
  out += '\n';
  for (std::size_t s = 0; s < trajectory.size(); ++s) {
    out += format_double(trajectory.times[s]);
    for (double v : trajectory.states[s]) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  if (truncation) out += "# truncated: " + *truncation + "\n";
  return out;
}

std::string comparison_csv(const std::vector<NamedSeries>& runs, const Provenance& provenance) {
  std::string out = provenance_line(provenance);
  out += "time";
  std::size_t rows = 0;
  const NamedSeries* longest = nullptr;
  for (const auto& r : runs) {
    out += "," + r.name + "_relative_error";
    if (r.times.size() >= rows) {
      rows = r.times.size();
      longest = &r;
    }
  }
  out += '\n';
  for (std::size_t k = 0; k < rows; ++k) {
    out += format_double(longest->times[k]);
    for (const auto& r : runs) {
      out += ',';
      if (k < r.values.size()) out += format_double(r.values[k]);
    }
    out += '\n';
  }
  return out;
}

MetricsSeries read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot read metrics CSV '" + path.string() + "'");
  MetricsSeries series;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      if (line.rfind("# relative_error holds absolute", 0) == 0) series.absolute_error = true;
      continue;
    }
    if (!header_seen) {
      if (line != kMetricsHeader) {
        throw Error(ErrorCode::kInvalidConfig, "unexpected metrics CSV header: " + line);
      }
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 5) throw Error(ErrorCode::kInvalidConfig, "malformed metrics row: " + line);
    series.times.push_back(std::stod(cells[0]));
    series.relative_error.push_back(std::stod(cells[1]));
    series.consensus_error.push_back(std::stod(cells[2]));
    series.optimality_residual.push_back(std::stod(cells[3]));
    series.lambda_sum_drift.push_back(std::stod(cells[4]));
  }
  return series;
}

std::string log_plot_svg(const std::vector<NamedSeries>& series, const std::string& title,
                         const std::string& y_label, const Provenance& provenance) {
  constexpr double kWidth = 800, kHeight = 500;
  constexpr double kLeft = 80, kRight = 170, kTop = 50, kBottom = 60;
  constexpr double kValueFloor = 1e-16;
  constexpr std::size_t kMaxPoints = 2000;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                           "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  double t_max = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      t_max = std::max(t_max, s.times[k]);
      const double v = std::max(s.values[k], kValueFloor);
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(t_max > 0.0)) t_max = 1.0;
  if (!std::isfinite(lo)) {
    lo = 1e-1;
    hi = 1.0;
  }
  int decade_lo = static_cast<int>(std::floor(std::log10(lo)));
  int decade_hi = static_cast<int>(std::ceil(std::log10(hi)));
  if (decade_hi <= decade_lo) decade_hi = decade_lo + 1;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto sx = [&](double t) { return kLeft + plot_w * t / t_max; };
  const auto sy = [&](double v) {
    const double d = std::log10(std::max(v, kValueFloor));
    return kTop + plot_h * (decade_hi - d) / (decade_hi - decade_lo);
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight, kWidth, kHeight);
  out += "<!-- " + escape_xml(provenance_line(provenance).substr(2)) + " -->\n";
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
                     kWidth, kHeight);
  out += fmt::format("<text x=\"{:.1f}\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     kLeft + plot_w / 2, escape_xml(title));

  // Decade grid and labels.
  const int decade_step = std::max(1, (decade_hi - decade_lo + 9) / 10);
  for (int d = decade_lo; d <= decade_hi; d += decade_step) {
    const double y = sy(std::pow(10.0, d));
    out += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n",
        kLeft, y, kLeft + plot_w, y);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">1e{}</text>\n",
                       kLeft - 6, y + 4, d);
  }
  for (int k = 0; k <= 5; ++k) {
    const double t = t_max * k / 5.0;
    const double x = sx(t);
    out += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n", x,
        kTop, x, kTop + plot_h);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", x,
                       kTop + plot_h + 18, t);
  }
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      kLeft, kTop, plot_w, plot_h);
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">time</text>\n",
                     kLeft + plot_w / 2, kHeight - 15);
  out += fmt::format(
      "<text x=\"20\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2f})\">{}</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2, escape_xml(y_label));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = palette[s % std::size(palette)];
    const std::size_t stride = std::max<std::size_t>(1, ser.times.size() / kMaxPoints);
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"", color);
    for (std::size_t k = 0; k < ser.times.size(); k += stride) {
      if (!std::isfinite(ser.values[k])) continue;
      out += fmt::format("{:.2f},{:.2f} ", sx(ser.times[k]), sy(ser.values[k]));
    }
    if (!ser.times.empty() && (ser.times.size() - 1) % stride != 0 &&
        std::isfinite(ser.values.back())) {
      out += fmt::format("{:.2f},{:.2f}", sx(ser.times.back()), sy(ser.values.back()));
    }
    out += "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    out += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
        "stroke-width=\"2\"/>\n",
        kLeft + plot_w + 12, ly, kLeft + plot_w + 36, ly, color);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kLeft + plot_w + 42, ly + 4,
                       escape_xml(ser.name));
  }
  out += "</svg>\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace pidflow::app
