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

#include "icleval/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "icleval/demoset.hpp"
#include "icleval/inference.hpp"
#include "icleval/manifest.hpp"
#include "icleval/metrics.hpp"
#include "icleval/prompt.hpp"
#include "icleval/protocol.hpp"
#include "icleval/report.hpp"
#include "icleval/scoring.hpp"
#include "icleval/util.hpp"

namespace icleval::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::BackendUnreachable:
    case ErrorCode::AuthMissing:
    case ErrorCode::ProtocolError:
      return kExitFatal;
    default:
      return kExitInvalidInput;
  }
}

namespace {

struct Globals {
  std::string data_root = ".";
  std::string results = "results";
  std::string backend = "mock";
  double mock_apcer = 0.0;
  double mock_bpcer = 0.0;
  std::uint64_t seed = 42;
  std::string template_path;
  bool fresh = false;
  int max_concurrent = 4;
  std::string log_level = "info";
  std::string task = "pad";
};

Task task_of(const Globals& g) {
  auto t = parse_task(g.task);
  if (!t) throw Error(ErrorCode::InvalidArgument, "--task must be pad or smad");
  return *t;
}

DatasetManifest load_manifest(const std::string& path, Task task) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path);
  return parse_manifest(in, task);
}

std::vector<DatasetManifest> load_manifests(const std::vector<std::string>& paths, Task task) {
  std::vector<DatasetManifest> out;
  for (const auto& p : paths) out.push_back(load_manifest(p, task));
  return out;
}

std::optional<PromptTemplate> load_template(const Globals& g) {
  if (g.template_path.empty()) return std::nullopt;
  auto t = parse_template(read_file(g.template_path));
  t.validate();
  return t;
}

std::string template_id(const PromptTemplate& t) {
  return "sha256:" + sha256_hex(serialize_template(t)).substr(0, 16);
}

std::string backend_model(const Globals& g) {
  if (g.backend == "mock") return "mock";
  return parse_backend_config(read_file(g.backend)).model_id;
}

std::vector<int> parse_shots(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : split(s, ',')) {
    const auto t = trim(part);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad shot count '" + t + "'");
    }
  }
  return out;
}

int cmd_validate(const Globals& g, const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  const Task task = task_of(g);
  int status = kExitOk;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) {
      err << path << ": cannot open\n";
      return kExitFatal;
    }
    const auto diags = validate_manifest(in, task);
    if (diags.empty()) {
      out << path << ": ok (" << load_manifest(path, task).records().size() << " records)\n";
      continue;
    }
    for (const auto& d : diags) {
      err << fmt::format("{}:{}: {}: {}\n", path, d.line_no, to_string(d.code), d.message);
    }
    status = kExitInvalidInput;
  }
  return status;
}

struct DemoArgs {
  std::string manifest;
  std::string categories;
  int shots = 1;
  std::string split = "train";
  std::string out;
  std::optional<bool> cropped;
};

int cmd_build_demos(const Globals& g, const DemoArgs& a, std::ostream& out) {
  const Task task = task_of(g);
  const auto manifest = load_manifest(a.manifest, task);
  DemosetRequest req;
  if (a.split != "all") {
    req.split = parse_split(a.split);
    if (!req.split) throw Error(ErrorCode::InvalidArgument, "--split must be train, dev, test or all");
  } else {
    req.split = std::nullopt;
  }
  req.categories.emplace(task, kBonaFide);
  if (a.categories.empty()) {
    for (const auto& c : manifest.categories()) req.categories.insert(c);
  } else {
    for (const auto& c : split(a.categories, ',')) req.categories.emplace(task, c);
  }
  req.n_shots = a.shots;
  req.seed = g.seed;
  req.instruction = load_template(g).value_or(PromptTemplate::defaults(task)).instruction_text;
  req.cropped = a.cropped;
  const auto text = serialize_demoset(build_demoset(manifest, req));
  if (a.out.empty()) {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

struct PlanArgs {
  std::vector<std::string> manifests;
  std::string scenario = "known_attack";
  std::string shots = "0,1,3,5,7,9";
  std::string out;
  int k_repeats = 5;
  int frame_budget = 5;
  std::string policy = "eer_on_self";
  std::optional<bool> cropped;
};

int cmd_plan(const Globals& g, const PlanArgs& a, std::ostream& out) {
  const Task task = task_of(g);
  const auto scenario = parse_scenario(a.scenario);
  if (!scenario) throw Error(ErrorCode::InvalidArgument, "--scenario must be known_attack, unknown_pai or cross_database");
  EnumerateOptions opts;
  opts.shots = parse_shots(a.shots);
  opts.seed = g.seed;
  opts.model = backend_model(g);
  if (const auto t = load_template(g)) opts.template_id = template_id(*t);
  opts.k_repeats = a.k_repeats;
  opts.frame_budget = a.frame_budget;
  opts.cropped = a.cropped;
  opts.hter_policy = parse_policy(a.policy);
  const auto plans = enumerate_plans(load_manifests(a.manifests, task), task, *scenario, opts);
  for (const auto& p : plans) p.validate();
  const auto text = serialize_plans(plans);
  if (a.out.empty()) {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    out << "wrote " << plans.size() << " plans to " << a.out << "\n";
  }
  return kExitOk;
}

struct RunArgs {
  std::string plans;
  std::vector<std::string> manifests;
};

int cmd_run(const Globals& g, const RunArgs& a, std::ostream& out, std::ostream& err) {
  auto plans = parse_plans(read_file(a.plans));
  if (plans.empty()) throw Error(ErrorCode::InvalidArgument, a.plans + " holds no plans");

  std::set<Task> tasks;
  for (const auto& p : plans) tasks.insert(p.task);
  std::vector<DatasetManifest> manifests;
  for (Task t : tasks) {
    for (auto& m : load_manifests(a.manifests, t)) manifests.push_back(std::move(m));
  }

  std::unique_ptr<Backend> backend;
  if (g.backend == "mock") {
    backend = std::make_unique<MockBackend>(MockBackend::ground_truth_from(manifests), g.mock_apcer, g.mock_bpcer,
                                            g.seed);
  } else {
    auto config = parse_backend_config(read_file(g.backend));
    config.max_concurrent = g.max_concurrent;
    backend = std::make_unique<HttpBackend>(config, g.data_root);
  }
  const auto tmpl = load_template(g);

  int computed = 0;
  int resumed = 0;
  int failed = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    auto plan = plans[i];
    if (!plan.model.empty() && plan.model != backend->model_id()) {
      spdlog::warn("plan {} names model '{}' but the backend serves '{}'; using the backend's", i, plan.model,
                   backend->model_id());
    }
    plan.model = backend->model_id();
    RunContext ctx;
    ctx.manifests = &manifests;
    ctx.backend = backend.get();
    ctx.results_dir = g.results;
    ctx.fresh = g.fresh;
    ctx.max_concurrent = g.max_concurrent;
    if (tmpl && tmpl->task == plan.task) {
      ctx.prompt_template = tmpl;
      plan.template_id = template_id(*tmpl);
    }
    for (const auto& r : run_plan(plan, ctx)) {
      if (!r.ok()) {
        ++failed;
        err << fmt::format("[{}/{}] {} n={}: FAILED {}\n", i + 1, plans.size(), r.plan_fingerprint, r.n_shots,
                           *r.error);
        continue;
      }
      (r.resumed ? resumed : computed)++;
      out << fmt::format("[{}/{}] {} n={}: d_eer={} bpcer10={}{}\n", i + 1, plans.size(), r.plan_fingerprint,
                         r.n_shots, report::format_percent(r.report.d_eer),
                         report::format_percent(r.report.bpcer10), r.resumed ? " (resumed)" : "");
    }
  }
  const auto summary = fmt::format("{} cells: {} computed, {} resumed, {} failed; {} backend calls",
                                   computed + resumed + failed, computed, resumed, failed, backend->calls());
  out << summary << "\n";
  spdlog::info("{}", summary);
  if (failed == 0) return kExitOk;
  return computed == 0 && resumed == 0 ? kExitFatal : kExitPartial;
}

struct EvaluateArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string policy;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (!a.out.empty() && a.inputs.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, "-o works with a single input");
  }
  for (const auto& input : a.inputs) {
    const fs::path csv(input);
    const auto rows = read_scores_csv(read_file(csv));
    std::vector<metrics::ScoreEntry> entries;
    for (const auto& r : rows) entries.push_back({r.score.score, r.label, r.category});
    const metrics::ScoreSet set(std::move(entries));

    metrics::ReportContext ctx;
    metrics::ThresholdPolicy policy = metrics::EerOnSelf{};
    long long unparseable = 0;
    long long queries = 0;
    std::set<std::string> testing;
    for (const auto& r : rows) {
      unparseable += r.score.votes_unparseable;
      queries += r.score.n_queries;
      if (r.label == Label::Attack) testing.insert(r.category);
    }
    ctx.parse_failure_rate = queries == 0 ? 0.0 : static_cast<double>(unparseable) / static_cast<double>(queries);
    if (!rows.empty()) {
      ctx.shots = rows.front().n_shots;
      ctx.seed = rows.front().seed;
    }
    ctx.testing.assign(testing.begin(), testing.end());
    ctx.model = "unknown";

    const auto dir = csv.parent_path();
    const auto plan_file = dir.parent_path() / "plan.json";
    if (fs::exists(plan_file)) {
      const auto plan = parse_plan(read_file(plan_file));
      ctx.model = plan.model;
      ctx.references.assign(plan.demo_source.categories.begin(), plan.demo_source.categories.end());
      ctx.testing.assign(plan.test_target.categories.begin(), plan.test_target.categories.end());
      ctx.seed = plan.seed;
      policy = plan.hter_policy;
    } else if (fs::exists(dir / "demoset.json")) {
      const auto demos = parse_demoset(read_file(dir / "demoset.json"));
      const auto cats = demos.attack_categories();
      ctx.references.assign(cats.begin(), cats.end());
    }
    if (!a.policy.empty()) policy = parse_policy(a.policy);
    ctx.threshold_policy = metrics::policy_name(policy);

    std::optional<metrics::ScoreSet> dev;
    if (std::holds_alternative<metrics::EerOnDev>(policy) && fs::exists(dir / "dev_scores.csv")) {
      std::vector<metrics::ScoreEntry> dev_entries;
      for (const auto& r : read_scores_csv(read_file(dir / "dev_scores.csv"))) {
        dev_entries.push_back({r.score.score, r.label, r.category});
      }
      dev.emplace(std::move(dev_entries));
    }
    const auto report = metrics::compute_report(set, policy, dev ? &*dev : nullptr);
    const fs::path target = a.out.empty() ? dir / "report.json" : fs::path(a.out);
    write_file_atomic(target, metrics::serialize_report(report, ctx));
    out << fmt::format("{}: d_eer={} auc={} -> {}\n", input, report::format_percent(report.d_eer),
                       report::format_percent(report.auc), target.string());
  }
  return kExitOk;
}

int cmd_report(const Globals& g, const std::string& dir, const std::string& axis, std::ostream& out) {
  report::ReportOptions opts;
  if (axis == "normal") {
    opts.axis = report::DetAxis::NormalDeviate;
  } else if (axis != "linear") {
    throw Error(ErrorCode::InvalidArgument, "--axis must be linear or normal");
  }
  const auto files = report::write_report(dir.empty() ? fs::path(g.results) : fs::path(dir), opts);
  for (const auto& f : files.written) out << "wrote " << f.string() << "\n";
  out << files.rows << " table rows\n";
  return kExitOk;
}

int cmd_serve_mock(const Globals& g, const std::vector<std::string>& manifest_paths, const std::string& host,
                   int port, std::ostream& out) {
  const auto manifests = load_manifests(manifest_paths, task_of(g));
  MockServer server(image_hash_handler(manifests, g.data_root, g.mock_apcer, g.mock_bpcer, g.seed), "mock");
  out << "serving mock backend on " << host << ":" << port << std::endl;
  server.listen_blocking(host, port);
  return kExitOk;
}

// Routes the default spdlog logger to err for the duration of a command.
class LogScope {
 public:
  LogScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("icleval", sink);
    logger->set_pattern("[%l] %v");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") {
      throw Error(ErrorCode::InvalidArgument, "unknown --log-level " + level);
    }
    logger->set_level(lvl);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

std::optional<bool> parse_cropped(const std::string& s) {
  if (s.empty() || s == "any") return std::nullopt;
  if (s == "true" || s == "cropped") return true;
  if (s == "false" || s == "uncropped") return false;
  throw Error(ErrorCode::InvalidArgument, "--cropped must be true, false or any");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"In-context learning evaluation harness for face attack detection"};
  app.name("icleval");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--data-root", g.data_root, "Root that manifest media paths are relative to");
  app.add_option("--results", g.results, "Results directory");
  app.add_option("--backend", g.backend, "Backend config JSON file, or 'mock'");
  app.add_option("--mock-apcer", g.mock_apcer, "Mock: probability an attack is answered bona fide");
  app.add_option("--mock-bpcer", g.mock_bpcer, "Mock: probability a bona fide sample is answered attack");
  app.add_option("--seed", g.seed, "Seed for demonstration draws and the mock");
  app.add_option("--template", g.template_path, "Prompt template JSON");
  app.add_flag("--fresh", g.fresh, "Discard completed cells instead of resuming");
  app.add_option("--max-concurrent", g.max_concurrent, "Samples scored in parallel");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");
  app.add_option("--task", g.task, "pad or smad; the task manifests belong to");

  std::vector<std::string> validate_paths;
  auto* validate = app.add_subcommand("validate", "Check manifests and list every violation");
  validate->add_option("manifests", validate_paths)->required();

  DemoArgs demo;
  std::string demo_cropped;
  auto* build = app.add_subcommand("build-demos", "Draw a demonstration set");
  build->add_option("--manifest", demo.manifest)->required();
  build->add_option("--categories", demo.categories, "Comma-separated attack categories (default: all)");
  build->add_option("--shots", demo.shots, "Samples per category");
  build->add_option("--split", demo.split, "train, dev, test or all");
  build->add_option("--cropped", demo_cropped, "true, false or any");
  build->add_option("-o,--out", demo.out);

  PlanArgs plan;
  std::string plan_cropped;
  auto* plan_cmd = app.add_subcommand("plan", "Enumerate experiment plans for a scenario");
  plan_cmd->add_option("--manifest", plan.manifests)->required();
  plan_cmd->add_option("--scenario", plan.scenario, "known_attack, unknown_pai or cross_database");
  plan_cmd->add_option("--shots", plan.shots, "Comma-separated shot counts");
  plan_cmd->add_option("--k-repeats", plan.k_repeats, "Queries per still image");
  plan_cmd->add_option("--frame-budget", plan.frame_budget, "Frames sampled per video");
  plan_cmd->add_option("--policy", plan.policy, "HTER threshold: eer_on_self, eer_on_dev or fixed(t)");
  plan_cmd->add_option("--cropped", plan_cropped, "true, false or any");
  plan_cmd->add_option("-o,--out", plan.out);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Execute plans, resuming completed cells");
  run_cmd->add_option("plans", run.plans)->required();
  run_cmd->add_option("--manifest", run.manifests)->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Recompute report.json from scores.csv");
  eval_cmd->add_option("scores", eval.inputs)->required();
  eval_cmd->add_option("-o,--out", eval.out);
  eval_cmd->add_option("--policy", eval.policy, "Override the HTER threshold policy");

  std::string report_dir;
  std::string axis = "linear";
  auto* report_cmd = app.add_subcommand("report", "Render tables and plots from a results directory");
  report_cmd->add_option("dir", report_dir, "Results directory (default: --results)");
  report_cmd->add_option("--axis", axis, "DET axes: linear or normal");

  std::vector<std::string> serve_manifests;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve-mock", "Serve the mock backend over the wire protocol");
  serve->add_option("--manifest", serve_manifests)->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    LogScope log(err, g.log_level);
    if (*validate) return cmd_validate(g, validate_paths, out, err);
    if (*build) {
      demo.cropped = parse_cropped(demo_cropped);
      return cmd_build_demos(g, demo, out);
    }
    if (*plan_cmd) {
      plan.cropped = parse_cropped(plan_cropped);
      return cmd_plan(g, plan, out);
    }
    if (*run_cmd) return cmd_run(g, run, out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*report_cmd) return cmd_report(g, report_dir, axis, out);
    if (*serve) return cmd_serve_mock(g, serve_manifests, host, port, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitInvalidInput;
}

}  // namespace icleval::cli
