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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "icleval/inference.hpp"
#include "icleval/manifest.hpp"
#include "icleval/metrics.hpp"
#include "icleval/prompt.hpp"
#include "icleval/scoring.hpp"

namespace icleval {

enum class Scenario { KnownAttack, UnknownPAI, CrossDatabase };

std::string_view to_string(Scenario s);  // known_attack, unknown_pai, cross_database
std::optional<Scenario> parse_scenario(std::string_view s);

/// Category sets below hold attack categories only; bona fide is always
/// drawn alongside them.
struct DemoSource {
  std::string dataset;
  std::optional<Split> split = Split::Train;  // nullopt: the whole database
  std::set<std::string> categories;
  std::optional<bool> cropped;
  friend bool operator==(const DemoSource&, const DemoSource&) = default;
};

struct TestTarget {
  std::string dataset;
  std::optional<Split> split = Split::Test;
  std::set<std::string> categories;
  std::optional<bool> cropped;
  friend bool operator==(const TestTarget&, const TestTarget&) = default;
};

inline const std::vector<int> kDefaultShots{0, 1, 3, 5, 7, 9};

struct ExperimentPlan {
  Task task = Task::PAD;
  Scenario scenario = Scenario::KnownAttack;
  DemoSource demo_source;
  TestTarget test_target;
  std::vector<int> shots = kDefaultShots;
  std::uint64_t seed = 42;
  std::string model;
  std::string template_id = "default";
  int k_repeats = 5;
  int frame_budget = 5;
  metrics::ThresholdPolicy hter_policy = metrics::EerOnSelf{};

  /// Scenario invariants; throws InvalidArgument.
  void validate() const;
};

/// Everything except the shot list, so extending a sweep reuses its cells.
std::string plan_fingerprint(const ExperimentPlan& plan);

std::string serialize_plan(const ExperimentPlan& plan);
ExperimentPlan parse_plan(const std::string& json_text);
/// A JSON list of plans.
std::string serialize_plans(const std::vector<ExperimentPlan>& plans);
std::vector<ExperimentPlan> parse_plans(const std::string& json_text);

metrics::ThresholdPolicy parse_policy(std::string_view name);

struct EnumerateOptions {
  std::vector<int> shots = kDefaultShots;
  std::uint64_t seed = 42;
  std::string model = "mock";
  std::string template_id = "default";
  int k_repeats = 5;
  int frame_budget = 5;
  std::optional<bool> cropped;
  metrics::ThresholdPolicy hter_policy = metrics::EerOnSelf{};
};

/// KnownAttack: every non-empty species subset as references, tested on each
/// species inside it. UnknownPAI: tested on each species outside it.
/// CrossDatabase: every ordered dataset pair; SMAD pairs one demonstration
/// tool with one test tool. Only manifests of the given task take part.
std::vector<ExperimentPlan> enumerate_plans(const std::vector<DatasetManifest>& manifests, Task task,
                                            Scenario scenario, const EnumerateOptions& options = {});

struct RunResult {
  ExperimentPlan plan;
  std::string plan_fingerprint;
  int n_shots = 0;
  std::vector<ScoreRow> scores;
  metrics::MetricReport report;
  double parse_failure_rate = 0.0;
  std::chrono::milliseconds duration{0};
  DemonstrationSet demoset;
  bool resumed = false;
  /// Set when the cell failed; the other fields are then empty.
  std::optional<std::string> error;
  std::optional<ErrorCode> error_code;

  bool ok() const { return !error.has_value(); }
  std::vector<std::string> references() const;
  std::vector<std::string> testing() const;
};

struct RunContext {
  const std::vector<DatasetManifest>* manifests = nullptr;
  Backend* backend = nullptr;
  /// Falls back to PromptTemplate::defaults(plan.task).
  std::optional<PromptTemplate> prompt_template;
  std::filesystem::path results_dir = "results";
  bool fresh = false;
  int max_concurrent = 4;
};

/// One cell per shot count. Cells are persisted as they finish and a cell
/// with a report.json is loaded instead of recomputed. A failing cell is
/// recorded in its RunResult and in failed.json; the remaining cells run.
std::vector<RunResult> run_plan(const ExperimentPlan& plan, const RunContext& ctx);

/// Completed cells under a results directory, ordered by fingerprint then
/// shot count.
std::vector<RunResult> load_results(const std::filesystem::path& results_dir);

enum class Criterion { DEer, Bpcer10, Bpcer20, Bpcer100, Hter };
double criterion_value(const metrics::MetricReport& r, Criterion c);

/// Test categories joined with '+', prefixed by "demo->test" for cross-database.
std::string group_key(const RunResult& r);

/// Lowest criterion per group; ties go to fewer shots, then the smaller
/// reference-set name. Failed results are skipped. Throws EmptyGroup when
/// nothing is left.
std::map<std::string, RunResult> select_best(const std::vector<RunResult>& results,
                                             Criterion criterion = Criterion::DEer);

struct TrendPoint {
  double d_eer = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  std::size_t n_results = 0;
};

/// Unweighted mean of each metric over the results sharing a shot count.
std::map<int, TrendPoint> shot_trend(const std::vector<RunResult>& results);

}  // namespace icleval
