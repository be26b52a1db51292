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

#include "icleval/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icleval/util.hpp"

namespace icleval {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::KnownAttack: return "known_attack";
    case Scenario::UnknownPAI: return "unknown_pai";
    case Scenario::CrossDatabase: return "cross_database";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view s) {
  const auto v = to_lower(trim(s));
  if (v == "known_attack") return Scenario::KnownAttack;
  if (v == "unknown_pai") return Scenario::UnknownPAI;
  if (v == "cross_database") return Scenario::CrossDatabase;
  return std::nullopt;
}

metrics::ThresholdPolicy parse_policy(std::string_view name) {
  const auto v = to_lower(trim(name));
  if (v == "eer_on_self") return metrics::EerOnSelf{};
  if (v == "eer_on_dev") return metrics::EerOnDev{};
  if (v.starts_with("fixed(") && v.ends_with(")")) {
    const auto inner = v.substr(6, v.size() - 7);
    double t = 0.0;
    auto [end, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), t);
    if (ec == std::errc{} && end == inner.data() + inner.size() && std::isfinite(t)) {
      return metrics::FixedThreshold{t};
    }
  }
  throw Error(ErrorCode::InvalidArgument,
              "threshold policy must be eer_on_self, eer_on_dev or fixed(<t>), got '" + std::string(name) + "'");
}

void ExperimentPlan::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "plan: " + why); };
  if (demo_source.dataset.empty() || test_target.dataset.empty()) fail("dataset names must be set");
  if (test_target.categories.empty()) fail("no test categories");
  for (const auto* set : {&demo_source.categories, &test_target.categories}) {
    for (const auto& c : *set) {
      if (c == kBonaFide) fail("category lists hold attack categories only");
    }
  }
  if (shots.empty()) fail("empty shot list");
  std::set<int> seen;
  for (int n : shots) {
    if (n < 0 || n > kDefaultShotCap) fail("shot count " + std::to_string(n) + " outside [0, 9]");
    if (!seen.insert(n).second) fail("shot count " + std::to_string(n) + " repeated");
  }
  if (k_repeats < 1 || frame_budget < 1) fail("k_repeats and frame_budget must be >= 1");

  const bool same_db = demo_source.dataset == test_target.dataset;
  switch (scenario) {
    case Scenario::KnownAttack:
      if (!same_db) fail("known_attack needs one dataset");
      if (!std::includes(demo_source.categories.begin(), demo_source.categories.end(),
                         test_target.categories.begin(), test_target.categories.end())) {
        fail("known_attack test categories must appear among the references");
      }
      break;
    case Scenario::UnknownPAI:
      if (!same_db) fail("unknown_pai needs one dataset");
      if (demo_source.categories.empty()) fail("unknown_pai needs reference categories");
      for (const auto& c : test_target.categories) {
        if (demo_source.categories.count(c)) fail("unknown_pai test category " + c + " is a reference");
      }
      break;
    case Scenario::CrossDatabase:
      if (same_db) fail("cross_database needs two different datasets");
      break;
  }
}

namespace {

ordered_json split_json(const std::optional<Split>& s) {
  return s ? ordered_json(std::string(to_string(*s))) : ordered_json(nullptr);
}

ordered_json cropped_json(const std::optional<bool>& c) {
  return c ? ordered_json(*c) : ordered_json(nullptr);
}

ordered_json identity_json(const ExperimentPlan& p) {
  ordered_json j;
  j["task"] = to_string(p.task);
  j["scenario"] = to_string(p.scenario);
  j["demo_source"] = ordered_json{{"dataset", p.demo_source.dataset},
                                  {"split", split_json(p.demo_source.split)},
                                  {"categories", p.demo_source.categories},
                                  {"cropped", cropped_json(p.demo_source.cropped)}};
  j["test_target"] = ordered_json{{"dataset", p.test_target.dataset},
                                  {"split", split_json(p.test_target.split)},
                                  {"categories", p.test_target.categories},
                                  {"cropped", cropped_json(p.test_target.cropped)}};
  j["seed"] = p.seed;
  j["model"] = p.model;
  j["template_id"] = p.template_id;
  j["k_repeats"] = p.k_repeats;
  j["frame_budget"] = p.frame_budget;
  j["hter_policy"] = metrics::policy_name(p.hter_policy);
  return j;
}

ordered_json plan_json(const ExperimentPlan& p) {
  auto j = identity_json(p);
  j["shots"] = p.shots;
  return j;
}

std::optional<Split> read_split(const nlohmann::json& j, std::optional<Split> fallback) {
  if (!j.contains("split")) return fallback;
  if (j["split"].is_null()) return std::nullopt;
  auto s = parse_split(j["split"].get<std::string>());
  if (!s) throw Error(ErrorCode::SchemaViolation, "plan: bad split " + j["split"].dump());
  return s;
}

std::optional<bool> read_cropped(const nlohmann::json& j) {
  if (!j.contains("cropped") || j["cropped"].is_null()) return std::nullopt;
  return j["cropped"].get<bool>();
}

std::set<std::string> read_categories(const nlohmann::json& j) {
  std::set<std::string> out;
  for (const auto& c : j.value("categories", nlohmann::json::array())) {
    out.insert(CategoryId(Task::PAD, c.get<std::string>()).name);
  }
  return out;
}

ExperimentPlan plan_from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  auto task = parse_task(j.at("task").get<std::string>());
  auto scenario = parse_scenario(j.at("scenario").get<std::string>());
  if (!task) throw Error(ErrorCode::SchemaViolation, "plan: bad task " + j.at("task").dump());
  if (!scenario) throw Error(ErrorCode::SchemaViolation, "plan: bad scenario " + j.at("scenario").dump());
  p.task = *task;
  p.scenario = *scenario;
  const auto& d = j.at("demo_source");
  p.demo_source.dataset = d.at("dataset").get<std::string>();
  p.demo_source.split = read_split(d, Split::Train);
  p.demo_source.categories = read_categories(d);
  p.demo_source.cropped = read_cropped(d);
  const auto& t = j.at("test_target");
  p.test_target.dataset = t.at("dataset").get<std::string>();
  p.test_target.split = read_split(t, Split::Test);
  p.test_target.categories = read_categories(t);
  p.test_target.cropped = read_cropped(t);
  if (j.contains("shots")) p.shots = j["shots"].get<std::vector<int>>();
  p.seed = j.value("seed", std::uint64_t{42});
  p.model = j.value("model", std::string());
  p.template_id = j.value("template_id", std::string("default"));
  p.k_repeats = j.value("k_repeats", 5);
  p.frame_budget = j.value("frame_budget", 5);
  p.hter_policy = parse_policy(j.value("hter_policy", std::string("eer_on_self")));
  return p;
}

}  // namespace

std::string plan_fingerprint(const ExperimentPlan& plan) {
  return sha256_hex(identity_json(plan).dump()).substr(0, 16);
}

std::string serialize_plan(const ExperimentPlan& plan) { return plan_json(plan).dump(2) + "\n"; }

ExperimentPlan parse_plan(const std::string& json_text) {
  try {
    return plan_from_json(nlohmann::json::parse(json_text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("plan JSON: ") + e.what());
  }
}

std::string serialize_plans(const std::vector<ExperimentPlan>& plans) {
  auto arr = ordered_json::array();
  for (const auto& p : plans) arr.push_back(plan_json(p));
  return arr.dump(2) + "\n";
}

std::vector<ExperimentPlan> parse_plans(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    std::vector<ExperimentPlan> out;
    if (j.is_object()) {
      out.push_back(plan_from_json(j));
    } else {
      for (const auto& p : j) out.push_back(plan_from_json(p));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("plans JSON: ") + e.what());
  }
}

namespace {

std::vector<std::string> attack_categories(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& c : m.categories()) {
    if (!c.is_bona_fide()) out.push_back(c.name);
  }
  return out;  // already sorted: categories() is an ordered set
}

// Non-empty subsets ordered by size, then lexicographically by members.
std::vector<std::set<std::string>> nonempty_subsets(const std::vector<std::string>& items) {
  std::vector<std::vector<std::string>> subsets;
  const std::size_t n = items.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    std::vector<std::string> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) s.push_back(items[i]);
    }
    subsets.push_back(std::move(s));
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  std::vector<std::set<std::string>> out;
  for (auto& s : subsets) out.emplace_back(s.begin(), s.end());
  return out;
}

}  // namespace

std::vector<ExperimentPlan> enumerate_plans(const std::vector<DatasetManifest>& manifests, Task task,
                                            Scenario scenario, const EnumerateOptions& options) {
  std::vector<const DatasetManifest*> pool;
  for (const auto& m : manifests) {
    if (m.task() == task) pool.push_back(&m);
  }
  const std::size_t needed = scenario == Scenario::CrossDatabase ? 2 : 1;
  if (pool.size() < needed) {
    throw Error(ErrorCode::InsufficientDatasets, std::string(to_string(scenario)) + " needs at least " +
                                                     std::to_string(needed) + " " +
                                                     std::string(to_string(task)) + " dataset(s)");
  }
  std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->name() < b->name(); });

  auto base = [&](const std::string& demo_db, const std::string& test_db) {
    ExperimentPlan p;
    p.task = task;
    p.scenario = scenario;
    p.demo_source.dataset = demo_db;
    p.demo_source.cropped = options.cropped;
    p.test_target.dataset = test_db;
    p.test_target.cropped = options.cropped;
    p.shots = options.shots;
    p.seed = options.seed;
    p.model = options.model;
    p.template_id = options.template_id;
    p.k_repeats = options.k_repeats;
    p.frame_budget = options.frame_budget;
    p.hter_policy = options.hter_policy;
    return p;
  };

  std::vector<ExperimentPlan> plans;
  if (scenario == Scenario::CrossDatabase) {
    for (const auto* demo : pool) {
      for (const auto* test : pool) {
        if (demo == test) continue;
        const auto demo_cats = attack_categories(*demo);
        const auto test_cats = attack_categories(*test);
        if (demo_cats.empty() || test_cats.empty()) {
          throw Error(ErrorCode::EmptyCategorySpace, demo->name() + " -> " + test->name() + ": no attack categories");
        }
        if (task == Task::SMAD) {
          // References come from the whole other database.
          for (const auto& a : demo_cats) {
            for (const auto& b : test_cats) {
              auto p = base(demo->name(), test->name());
              p.demo_source.split = std::nullopt;
              p.test_target.split = std::nullopt;
              p.demo_source.categories = {a};
              p.test_target.categories = {b};
              plans.push_back(std::move(p));
            }
          }
        } else {
          auto p = base(demo->name(), test->name());
          p.demo_source.categories = {demo_cats.begin(), demo_cats.end()};
          p.test_target.categories = {test_cats.begin(), test_cats.end()};
          plans.push_back(std::move(p));
        }
      }
    }
    return plans;
  }

  for (const auto* m : pool) {
    const auto species = attack_categories(*m);
    if (species.empty() || (scenario == Scenario::UnknownPAI && species.size() < 2)) {
      throw Error(ErrorCode::EmptyCategorySpace,
                  m->name() + ": too few attack categories for " + std::string(to_string(scenario)));
    }
    if (species.size() > 20) {
      throw Error(ErrorCode::InvalidArgument, m->name() + ": too many attack categories to enumerate");
    }
    const auto subsets = nonempty_subsets(species);
    for (const auto& test_species : species) {
      for (const auto& refs : subsets) {
        const bool inside = refs.count(test_species) != 0;
        if (inside != (scenario == Scenario::KnownAttack)) continue;
        auto p = base(m->name(), m->name());
        p.demo_source.categories = refs;
        p.test_target.categories = {test_species};
        plans.push_back(std::move(p));
      }
    }
  }
  return plans;
}

std::vector<std::string> RunResult::references() const {
  return {plan.demo_source.categories.begin(), plan.demo_source.categories.end()};
}

std::vector<std::string> RunResult::testing() const {
  return {plan.test_target.categories.begin(), plan.test_target.categories.end()};
}

namespace {

const DatasetManifest& find_manifest(const std::vector<DatasetManifest>& manifests, const std::string& name,
                                     Task task) {
  for (const auto& m : manifests) {
    if (m.name() == name && m.task() == task) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "no " + std::string(to_string(task)) + " manifest named " + name);
}

std::set<CategoryId> with_bona_fide(Task task, const std::set<std::string>& names) {
  std::set<CategoryId> out{CategoryId(task, kBonaFide)};
  for (const auto& n : names) out.emplace(task, n);
  return out;
}

std::vector<SampleScore> score_records(const std::vector<SampleRecord>& records, const DemonstrationSet& demoset,
                                       const PromptTemplate& tmpl, Backend& backend,
                                       const ScoringOptions& options, int max_concurrent) {
  std::vector<SampleScore> out(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::size_t err_index = records.size();
  std::exception_ptr err;

  auto work = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        out[i] = score_sample(records[i], demoset, tmpl, backend, options);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
        abort.store(true);
      }
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_concurrent)), records.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (err) std::rethrow_exception(err);
  return out;
}

std::vector<ScoreRow> to_rows(const std::vector<SampleRecord>& records, std::vector<SampleScore> scores,
                              int n_shots, std::uint64_t seed) {
  std::vector<ScoreRow> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back(ScoreRow{records[i].dataset, records[i].split, records[i].label, records[i].category.name,
                            n_shots, seed, std::move(scores[i])});
  }
  return rows;
}

metrics::ScoreSet to_scoreset(const std::vector<ScoreRow>& rows) {
  std::vector<metrics::ScoreEntry> entries;
  entries.reserve(rows.size());
  for (const auto& r : rows) entries.push_back({r.score.score, r.label, r.category});
  return metrics::ScoreSet(std::move(entries));
}

double parse_failure_rate(const std::vector<ScoreRow>& rows) {
  long long unparseable = 0;
  long long queries = 0;
  for (const auto& r : rows) {
    unparseable += r.score.votes_unparseable;
    queries += r.score.n_queries;
  }
  return queries == 0 ? 0.0 : static_cast<double>(unparseable) / static_cast<double>(queries);
}

metrics::ReportContext report_context(const RunResult& r) {
  metrics::ReportContext ctx;
  ctx.model = r.plan.model;
  ctx.references = r.references();
  ctx.testing = r.testing();
  ctx.shots = r.n_shots;
  ctx.seed = r.plan.seed;
  ctx.parse_failure_rate = r.parse_failure_rate;
  ctx.threshold_policy = metrics::policy_name(r.plan.hter_policy);
  return ctx;
}

RunResult load_cell(const ExperimentPlan& plan, const std::string& fp, const fs::path& cell, int n) {
  RunResult r;
  r.plan = plan;
  r.plan_fingerprint = fp;
  r.n_shots = n;
  r.resumed = true;
  metrics::ReportContext ctx;
  r.report = metrics::parse_report(read_file(cell / "report.json"), &ctx);
  r.parse_failure_rate = ctx.parse_failure_rate;
  r.scores = read_scores_csv(read_file(cell / "scores.csv"));
  r.demoset = parse_demoset(read_file(cell / "demoset.json"));
  return r;
}

RunResult run_cell(const ExperimentPlan& plan, const std::string& fp, int n, const RunContext& ctx,
                   const PromptTemplate& tmpl, const DatasetManifest& demo_m, const DatasetManifest& test_m) {
  const fs::path cell = ctx.results_dir / fp / std::to_string(n);
  if (fs::exists(cell / "report.json")) {
    spdlog::info("{} n={}: already complete, skipping", fp, n);
    return load_cell(plan, fp, cell, n);
  }
  fs::remove(cell / "failed.json");

  RunResult r;
  r.plan = plan;
  r.plan_fingerprint = fp;
  r.n_shots = n;
  const auto start = std::chrono::steady_clock::now();
  try {
    DemosetRequest req;
    req.split = plan.demo_source.split;
    req.categories = with_bona_fide(plan.task, plan.demo_source.categories);
    req.n_shots = n;
    req.seed = hash_combine(plan.seed, static_cast<std::uint64_t>(n));
    req.instruction = tmpl.instruction_text;
    req.cropped = plan.demo_source.cropped;
    r.demoset = build_demoset(demo_m, req);

    auto pick = [&](std::optional<Split> split) {
      auto recs = filter_records(test_m, split, with_bona_fide(plan.task, plan.test_target.categories),
                                 plan.test_target.cropped);
      std::erase_if(recs, [&](const SampleRecord& s) { return r.demoset.contains(s.sample_id); });
      return recs;
    };
    const ScoringOptions options{plan.k_repeats, plan.frame_budget};

    const auto test_records = pick(plan.test_target.split);
    r.scores = to_rows(test_records,
                       score_records(test_records, r.demoset, tmpl, *ctx.backend, options, ctx.max_concurrent), n,
                       plan.seed);
    r.parse_failure_rate = parse_failure_rate(r.scores);

    std::optional<std::vector<ScoreRow>> dev_rows;
    std::optional<metrics::ScoreSet> dev_set;
    if (std::holds_alternative<metrics::EerOnDev>(plan.hter_policy)) {
      const auto dev_records = pick(Split::Dev);
      dev_rows = to_rows(dev_records,
                         score_records(dev_records, r.demoset, tmpl, *ctx.backend, options, ctx.max_concurrent),
                         n, plan.seed);
      dev_set = to_scoreset(*dev_rows);
    }
    r.report = metrics::compute_report(to_scoreset(r.scores), plan.hter_policy, dev_set ? &*dev_set : nullptr);

    write_file_atomic(cell / "scores.csv", write_scores_csv(r.scores));
    if (dev_rows) write_file_atomic(cell / "dev_scores.csv", write_scores_csv(*dev_rows));
    write_file_atomic(cell / "demoset.json", serialize_demoset(r.demoset));
    // Written last: its presence marks the cell complete.
    write_file_atomic(cell / "report.json", metrics::serialize_report(r.report, report_context(r)));
    r.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    spdlog::info("{} n={}: d_eer={} over {} samples in {} ms", fp, n, format_fixed(r.report.d_eer, 4),
                 r.scores.size(), r.duration.count());
  } catch (const Error& e) {
    r = RunResult{};
    r.plan = plan;
    r.plan_fingerprint = fp;
    r.n_shots = n;
    r.error = e.what();
    r.error_code = e.code();
    r.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    ordered_json failed{{"error", to_string(e.code())}, {"message", e.detail()}};
    write_file_atomic(cell / "failed.json", failed.dump(2) + "\n");
    spdlog::error("{} n={}: {}", fp, n, e.what());
  }
  return r;
}

}  // namespace

std::vector<RunResult> run_plan(const ExperimentPlan& plan, const RunContext& ctx) {
  if (ctx.manifests == nullptr || ctx.backend == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "run_plan needs manifests and a backend");
  }
  plan.validate();
  const auto tmpl = ctx.prompt_template.value_or(PromptTemplate::defaults(plan.task));
  if (tmpl.task != plan.task) throw Error(ErrorCode::TemplateMismatch, "template task differs from plan task");
  tmpl.validate();
  const auto& demo_m = find_manifest(*ctx.manifests, plan.demo_source.dataset, plan.task);
  const auto& test_m = find_manifest(*ctx.manifests, plan.test_target.dataset, plan.task);

  const auto fp = plan_fingerprint(plan);
  const fs::path dir = ctx.results_dir / fp;
  if (ctx.fresh) fs::remove_all(dir);
  write_file_atomic(dir / "plan.json", serialize_plan(plan));

  std::vector<RunResult> results;
  for (int n : plan.shots) results.push_back(run_cell(plan, fp, n, ctx, tmpl, demo_m, test_m));
  return results;
}

std::vector<RunResult> load_results(const fs::path& results_dir) {
  std::vector<RunResult> out;
  if (!fs::is_directory(results_dir)) return out;
  std::vector<fs::path> plan_dirs;
  for (const auto& e : fs::directory_iterator(results_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "plan.json")) plan_dirs.push_back(e.path());
  }
  std::sort(plan_dirs.begin(), plan_dirs.end());
  for (const auto& dir : plan_dirs) {
    const auto plan = parse_plan(read_file(dir / "plan.json"));
    const auto fp = dir.filename().string();
    if (plan_fingerprint(plan) != fp) {
      spdlog::warn("{}: plan.json does not hash to its directory name, skipping", dir.string());
      continue;
    }
    std::vector<int> cells;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      int n = 0;
      auto [end, ec] = std::from_chars(name.data(), name.data() + name.size(), n);
      if (e.is_directory() && ec == std::errc{} && end == name.data() + name.size() &&
          fs::exists(e.path() / "report.json")) {
        cells.push_back(n);
      }
    }
    std::sort(cells.begin(), cells.end());
    for (int n : cells) out.push_back(load_cell(plan, fp, dir / std::to_string(n), n));
  }
  return out;
}

double criterion_value(const metrics::MetricReport& r, Criterion c) {
  switch (c) {
    case Criterion::DEer: return r.d_eer;
    case Criterion::Bpcer10: return r.bpcer10;
    case Criterion::Bpcer20: return r.bpcer20;
    case Criterion::Bpcer100: return r.bpcer100;
    case Criterion::Hter: return r.hter;
  }
  return r.d_eer;
}

std::string group_key(const RunResult& r) {
  const auto testing = r.testing();
  std::string key = r.plan.scenario == Scenario::CrossDatabase
                        ? r.plan.demo_source.dataset + "->" + r.plan.test_target.dataset
                        : r.plan.test_target.dataset;
  key += ":" + join(testing, "+");
  if (r.plan.test_target.cropped) key += *r.plan.test_target.cropped ? ":cropped" : ":uncropped";
  return key;
}

std::map<std::string, RunResult> select_best(const std::vector<RunResult>& results, Criterion criterion) {
  std::map<std::string, const RunResult*> best;
  auto better = [&](const RunResult& a, const RunResult& b) {
    const double va = criterion_value(a.report, criterion);
    const double vb = criterion_value(b.report, criterion);
    if (va != vb) return va < vb;
    if (a.n_shots != b.n_shots) return a.n_shots < b.n_shots;
    const auto ra = join(a.references(), ",");
    const auto rb = join(b.references(), ",");
    if (ra != rb) return ra < rb;
    return a.plan_fingerprint < b.plan_fingerprint;
  };
  for (const auto& r : results) {
    if (!r.ok()) continue;
    auto& slot = best[group_key(r)];
    if (slot == nullptr || better(r, *slot)) slot = &r;
  }
  if (best.empty()) throw Error(ErrorCode::EmptyGroup, "no completed results to select from");
  std::map<std::string, RunResult> out;
  for (const auto& [k, v] : best) out.emplace(k, *v);
  return out;
}

std::map<int, TrendPoint> shot_trend(const std::vector<RunResult>& results) {
  std::map<int, TrendPoint> sums;
  for (const auto& r : results) {
    if (!r.ok()) continue;
    auto& t = sums[r.n_shots];
    t.d_eer += r.report.d_eer;
    t.bpcer10 += r.report.bpcer10;
    t.bpcer20 += r.report.bpcer20;
    t.bpcer100 += r.report.bpcer100;
    ++t.n_results;
  }
  for (auto& [n, t] : sums) {
    const auto k = static_cast<double>(t.n_results);
    t.d_eer /= k;
    t.bpcer10 /= k;
    t.bpcer20 /= k;
    t.bpcer100 /= k;
  }
  return sums;
}

}  // namespace icleval
