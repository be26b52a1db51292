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

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icleval/metrics.hpp"
#include "icleval/protocol.hpp"

namespace icleval::report {

/// 100 * rate rounded half-up to hundredths, e.g. 0.1167 -> "11.67".
std::string format_percent(double rate);

struct TableRow {
  std::string model;
  std::vector<std::string> references;
  std::string testing;
  int shots = 0;
  double d_eer = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  bool best = false;

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

TableRow table_row(const RunResult& r);

/// D-EER, BPCER10, BPCER20, BPCER100 as rendered in a table.
std::array<std::string, 4> rendered_rates(const TableRow& row);

enum class TableFormat { Markdown, Csv };

/// Columns in TableRow order. Markdown bolds the rates of best rows and uses
/// BSCER headings for SMAD; CSV adds a trailing best column (0/1) and joins
/// references with ';'.
std::string render_table(std::span<const TableRow> rows, TableFormat format, Task task = Task::PAD);
/// Inverse of the CSV rendering; rates come back as the rounded percentages / 100.
std::vector<TableRow> parse_table_csv(const std::string& text);

enum class DetAxis { Linear, NormalDeviate };

/// APCER on x, BPCER on y, one polyline per curve with the legend in input
/// order. Throws EmptyCurve when a curve has fewer than two points.
std::string render_det_svg(const std::vector<std::pair<std::string, std::vector<metrics::DetPoint>>>& curves,
                           DetAxis axis = DetAxis::Linear);

/// Percentage of each averaged metric against shot count. Throws
/// InsufficientPoints with fewer than two shot values.
std::string render_trend_plot(const std::map<int, TrendPoint>& trend);

struct ReportOptions {
  DetAxis axis = DetAxis::Linear;
};

struct ReportFiles {
  std::vector<std::filesystem::path> written;
  std::size_t rows = 0;
};

/// report.md, report.csv, det_{fingerprint}.svg per plan and trend.svg in
/// results_dir. Throws NoResults when no cell has completed.
ReportFiles write_report(const std::filesystem::path& results_dir, const ReportOptions& options = {});

}  // namespace icleval::report
