// Copyright 2026 The icleval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "icleval/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <tuple>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "icleval/util.hpp"

namespace icleval::report {

namespace fs = std::filesystem;

std::string format_percent(double rate) {
  const long long hundredths = std::llround(10000.0 * rate);
  const long long mag = hundredths < 0 ? -hundredths : hundredths;
  return fmt::format("{}{}.{:02d}", hundredths < 0 ? "-" : "", mag / 100, mag % 100);
}

TableRow table_row(const RunResult& r) {
  return TableRow{r.plan.model,      r.references(),    join(r.testing(), "+"), r.n_shots,
                  r.report.d_eer,    r.report.bpcer10,  r.report.bpcer20,       r.report.bpcer100,
                  false};
}

std::array<std::string, 4> rendered_rates(const TableRow& row) {
  return {format_percent(row.d_eer), format_percent(row.bpcer10), format_percent(row.bpcer20),
          format_percent(row.bpcer100)};
}

namespace {

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_table(std::span<const TableRow> rows, TableFormat format, Task task) {
  std::string out;
  if (format == TableFormat::Csv) {
    out = "model,references,testing,shots,d_eer,bpcer10,bpcer20,bpcer100,best\n";
    for (const auto& r : rows) {
      const auto rates = rendered_rates(r);
      const std::vector<std::string> fields{r.model,    join(r.references, ";"), r.testing,
                                            std::to_string(r.shots), rates[0], rates[1],
                                            rates[2],   rates[3],                r.best ? "1" : "0"};
      out += csv_join(fields) + "\n";
    }
    return out;
  }

  const char* bp = task == Task::SMAD ? "BSCER" : "BPCER";
  out += fmt::format("| Model | References | Testing | Shots | D-EER | {0}10 | {0}20 | {0}100 |\n", bp);
  out += "|---|---|---|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    auto rates = rendered_rates(r);
    if (r.best) {
      for (auto& s : rates) s = "**" + s + "**";
    }
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n", md_cell(r.model),
                       md_cell(join(r.references, ", ")), md_cell(r.testing), r.shots, rates[0], rates[1],
                       rates[2], rates[3]);
  }
  return out;
}

std::vector<TableRow> parse_table_csv(const std::string& text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != "model,references,testing,shots,d_eer,bpcer10,bpcer20,bpcer100,best") {
    throw Error(ErrorCode::SchemaViolation, "table CSV: unexpected header");
  }
  auto number = [](const std::string& s, auto& out) {
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || end != s.data() + s.size()) {
      throw Error(ErrorCode::SchemaViolation, "table CSV: bad number '" + s + "'");
    }
  };
  std::vector<TableRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 9) throw Error(ErrorCode::SchemaViolation, "table CSV: expected 9 fields");
    TableRow r;
    r.model = f[0];
    if (!f[1].empty()) r.references = split(f[1], ';');
    r.testing = f[2];
    number(f[3], r.shots);
    double* rates[] = {&r.d_eer, &r.bpcer10, &r.bpcer20, &r.bpcer100};
    for (int k = 0; k < 4; ++k) {
      number(f[4 + k], *rates[k]);
      *rates[k] /= 100.0;
    }
    r.best = f[8] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

constexpr double kPlotX = 70.0;
constexpr double kPlotY = 20.0;
constexpr double kPlotW = 360.0;
constexpr double kPlotH = 360.0;
constexpr double kWidth = 600.0;
constexpr double kHeight = 430.0;
constexpr double kRateFloor = 1e-4;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) { return format_fixed(v, 2); }

double probit(double p) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, std::clamp(p, kRateFloor, 1.0 - kRateFloor));
}

// Position in [0, 1] along an axis for a rate.
double axis_fraction(double rate, DetAxis axis) {
  if (axis == DetAxis::Linear) return std::clamp(rate, 0.0, 1.0);
  const double lo = probit(kRateFloor);
  const double hi = probit(1.0 - kRateFloor);
  return (probit(rate) - lo) / (hi - lo);
}

double px(double fraction) { return kPlotX + fraction * kPlotW; }
double py(double fraction) { return kPlotY + kPlotH - fraction * kPlotH; }

void open_svg(std::string& out) {
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      num(kWidth), num(kHeight));
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", num(kWidth),
                     num(kHeight));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     num(kPlotX), num(kPlotY), num(kPlotW), num(kPlotH));
}

void axis_labels(std::string& out, std::string_view x_label, std::string_view y_label) {
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(kPlotX + kPlotW / 2),
                     num(kPlotY + kPlotH + 34), xml_escape(x_label));
  out += fmt::format(
      "<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
      num(kPlotX - 44), num(kPlotY + kPlotH / 2), xml_escape(y_label));
}

void y_tick(std::string& out, double fraction, std::string_view label) {
  const double y = py(fraction);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#dddddd\"/>\n", num(kPlotX), num(y),
                     num(kPlotX + kPlotW));
  out += fmt::format("<text class=\"ytick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kPlotX - 6),
                     num(y + 4), label);
}

void x_tick(std::string& out, double fraction, std::string_view label) {
  const double x = px(fraction);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#dddddd\"/>\n", num(x), num(kPlotY),
                     num(kPlotY + kPlotH));
  out += fmt::format("<text class=\"xtick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(x),
                     num(kPlotY + kPlotH + 16), label);
}

void legend_entry(std::string& out, std::size_t i, std::string_view label) {
  const double y = kPlotY + 10 + 18 * static_cast<double>(i);
  const double x = kPlotX + kPlotW + 16;
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", num(x),
                     num(y), num(x + 20), num(y), kPalette[i % kPalette.size()]);
  out += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>\n", num(x + 26), num(y + 4),
                     xml_escape(label));
}

void polyline(std::string& out, std::size_t i, const std::vector<std::pair<double, double>>& pts) {
  std::string coords;
  for (const auto& [x, y] : pts) {
    if (!coords.empty()) coords += ' ';
    coords += num(x) + "," + num(y);
  }
  out += fmt::format("<polyline id=\"series-{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", i,
                     kPalette[i % kPalette.size()], coords);
}

}  // namespace

std::string render_det_svg(const std::vector<std::pair<std::string, std::vector<metrics::DetPoint>>>& curves,
                           DetAxis axis) {
  if (curves.empty()) throw Error(ErrorCode::EmptyCurve, "no curves to plot");
  for (const auto& [label, pts] : curves) {
    if (pts.size() < 2) throw Error(ErrorCode::EmptyCurve, "curve '" + label + "' has fewer than 2 points");
  }
  std::string out;
  open_svg(out);
  if (axis == DetAxis::Linear) {
    for (int k = 0; k <= 5; ++k) {
      const double f = k / 5.0;
      const auto label = std::to_string(k * 20);
      x_tick(out, f, label);
      y_tick(out, f, label);
    }
  } else {
    static const std::array<std::pair<double, const char*>, 9> ticks{
        {{0.001, "0.1"}, {0.01, "1"}, {0.05, "5"}, {0.2, "20"}, {0.5, "50"},
         {0.8, "80"}, {0.95, "95"}, {0.99, "99"}, {0.999, "99.9"}}};
    for (const auto& [rate, label] : ticks) {
      x_tick(out, axis_fraction(rate, axis), label);
      y_tick(out, axis_fraction(rate, axis), label);
    }
  }
  axis_labels(out, "APCER (%)", "BPCER (%)");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curves[i].second) {
      pts.emplace_back(px(axis_fraction(p.apcer, axis)), py(axis_fraction(p.bpcer, axis)));
    }
    polyline(out, i, pts);
    legend_entry(out, i, curves[i].first);
  }
  out += "</svg>\n";
  return out;
}

std::string render_trend_plot(const std::map<int, TrendPoint>& trend) {
  if (trend.size() < 2) throw Error(ErrorCode::InsufficientPoints, "trend needs at least 2 shot values");
  const double lo = trend.begin()->first;
  const double hi = trend.rbegin()->first;
  auto xf = [&](int shots) { return (shots - lo) / (hi - lo); };

  std::string out;
  open_svg(out);
  for (const auto& [shots, _] : trend) x_tick(out, xf(shots), std::to_string(shots));
  for (int k = 0; k <= 5; ++k) y_tick(out, k / 5.0, std::to_string(k * 20));
  axis_labels(out, "Shots", "Error rate (%)");

  const std::array<std::pair<const char*, double TrendPoint::*>, 4> series{{{"D-EER", &TrendPoint::d_eer},
                                                                            {"BPCER10", &TrendPoint::bpcer10},
                                                                            {"BPCER20", &TrendPoint::bpcer20},
                                                                            {"BPCER100", &TrendPoint::bpcer100}}};
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [shots, t] : trend) {
      pts.emplace_back(px(xf(shots)), py(std::clamp(t.*series[i].second, 0.0, 1.0)));
    }
    polyline(out, i, pts);
    legend_entry(out, i, series[i].first);
  }
  out += "</svg>\n";
  return out;
}

namespace {

std::string section_title(const ExperimentPlan& p) {
  std::string s = fmt::format("{} {}: ", to_string(p.task) == "pad" ? "PAD" : "S-MAD", to_string(p.scenario));
  s += p.scenario == Scenario::CrossDatabase ? p.demo_source.dataset + " -> " + p.test_target.dataset
                                             : p.test_target.dataset;
  if (p.test_target.cropped) s += *p.test_target.cropped ? " (cropped)" : " (uncropped)";
  return s;
}

}  // namespace

ReportFiles write_report(const fs::path& results_dir, const ReportOptions& options) {
  const auto results = load_results(results_dir);
  if (results.empty()) {
    throw Error(ErrorCode::NoResults, "no completed cells under " + results_dir.string());
  }

  // Sections keyed by title; rows inside sorted by testing, references, shots.
  std::map<std::string, std::vector<const RunResult*>> sections;
  std::map<std::string, Task> section_task;
  for (const auto& r : results) {
    const auto title = section_title(r.plan);
    sections[title].push_back(&r);
    section_task[title] = r.plan.task;
  }

  ReportFiles files;
  std::string md = "# Results\n";
  std::vector<TableRow> all_rows;
  for (auto& [title, members] : sections) {
    std::vector<RunResult> copies;
    for (const auto* m : members) copies.push_back(*m);
    const auto best = select_best(copies);

    std::vector<std::pair<std::tuple<std::string, std::string, int, std::string>, TableRow>> keyed;
    for (const auto* m : members) {
      auto row = table_row(*m);
      const auto& b = best.at(group_key(*m));
      row.best = b.plan_fingerprint == m->plan_fingerprint && b.n_shots == m->n_shots;
      keyed.push_back({{row.testing, join(row.references, ","), row.shots, m->plan_fingerprint}, row});
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<TableRow> rows;
    for (auto& [_, row] : keyed) rows.push_back(row);

    md += "\n## " + title + "\n\n" + render_table(rows, TableFormat::Markdown, section_task[title]);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  files.rows = all_rows.size();

  auto emit = [&](const fs::path& p, const std::string& text) {
    write_file_atomic(p, text);
    files.written.push_back(p);
  };
  emit(results_dir / "report.md", md);
  emit(results_dir / "report.csv", render_table(all_rows, TableFormat::Csv));

  std::map<std::string, std::vector<std::pair<std::string, std::vector<metrics::DetPoint>>>> det_by_plan;
  for (const auto& r : results) {
    det_by_plan[r.plan_fingerprint].emplace_back(fmt::format("{}-shot", r.n_shots), r.report.det);
  }
  for (const auto& [fp, curves] : det_by_plan) {
    emit(results_dir / ("det_" + fp + ".svg"), render_det_svg(curves, options.axis));
  }

  const auto trend = shot_trend(results);
  if (trend.size() >= 2) {
    emit(results_dir / "trend.svg", render_trend_plot(trend));
  } else {
    spdlog::warn("only one shot value present; trend.svg not written");
  }
  return files;
}

}  // namespace icleval::report
