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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "icleval/protocol.hpp"
#include "icleval/util.hpp"
#include "test_support.hpp"

namespace icleval {
namespace {

// Non-empty subsets of n items, and for each the number of members
// (KnownAttack tests on members) or non-members (UnknownPAI).
std::pair<std::size_t, std::size_t> subset_counts(int n) {
  std::size_t inside = 0;
  std::size_t outside = 0;
  for (int mask = 1; mask < (1 << n); ++mask) {
    const int members = __builtin_popcount(static_cast<unsigned>(mask));
    inside += static_cast<std::size_t>(members);
    outside += static_cast<std::size_t>(n - members);
  }
  return {inside, outside};
}

TEST(EnumeratePlans, CombinatorialCounts) {
  const std::vector<DatasetManifest> m{testing::casia_like()};
  const auto known = enumerate_plans(m, Task::PAD, Scenario::KnownAttack);
  const auto unknown = enumerate_plans(m, Task::PAD, Scenario::UnknownPAI);
  const auto [inside, outside] = subset_counts(3);
  EXPECT_EQ(known.size(), inside);
  EXPECT_EQ(unknown.size(), outside);
  EXPECT_EQ(known.size(), 12u);
  EXPECT_EQ(unknown.size(), 9u);

  std::set<std::string> fingerprints;
  for (const auto& p : known) {
    EXPECT_NO_THROW(p.validate());
    ASSERT_EQ(p.test_target.categories.size(), 1u);
    EXPECT_TRUE(p.demo_source.categories.count(*p.test_target.categories.begin()));
    EXPECT_EQ(p.demo_source.split, Split::Train);
    fingerprints.insert(plan_fingerprint(p));
  }
  for (const auto& p : unknown) {
    EXPECT_FALSE(p.demo_source.categories.count(*p.test_target.categories.begin()));
    fingerprints.insert(plan_fingerprint(p));
  }
  EXPECT_EQ(fingerprints.size(), 21u);
}

TEST(EnumeratePlans, CrossDatabase) {
  const std::vector<DatasetManifest> one{testing::casia_like("a")};
  try {
    enumerate_plans(one, Task::PAD, Scenario::CrossDatabase);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientDatasets);
  }
  const std::vector<DatasetManifest> pad{testing::casia_like("a"), testing::casia_like("b"),
                                         testing::casia_like("c")};
  const auto plans = enumerate_plans(pad, Task::PAD, Scenario::CrossDatabase);
  EXPECT_EQ(plans.size(), 6u);
  for (const auto& p : plans) EXPECT_NE(p.demo_source.dataset, p.test_target.dataset);

  const std::vector<DatasetManifest> smad{
      testing::small_manifest("x", Task::SMAD, {{"bona_fide", {2, 2}}, {"tool1", {2, 2}}, {"tool2", {2, 2}}}),
      testing::small_manifest("y", Task::SMAD, {{"bona_fide", {2, 2}}, {"tool3", {2, 2}}})};
  // x->y: 2 demo tools x 1 test tool, y->x: 1 x 2.
  const auto sp = enumerate_plans(smad, Task::SMAD, Scenario::CrossDatabase);
  EXPECT_EQ(sp.size(), 4u);
  for (const auto& p : sp) {
    EXPECT_EQ(p.demo_source.categories.size(), 1u);
    EXPECT_EQ(p.test_target.categories.size(), 1u);
    EXPECT_FALSE(p.demo_source.split);
  }
}

TEST(EnumeratePlans, UnknownPaiNeedsTwoSpecies) {
  const std::vector<DatasetManifest> m{
      testing::small_manifest("s", Task::PAD, {{"bona_fide", {2, 2}}, {"print", {2, 2}}})};
  try {
    enumerate_plans(m, Task::PAD, Scenario::UnknownPAI);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCategorySpace);
  }
}

TEST(Plan, ValidateAndSerialize) {
  ExperimentPlan p;
  p.demo_source = {"d", Split::Train, {"print"}, std::nullopt};
  p.test_target = {"d", Split::Test, {"print"}, true};
  p.hter_policy = metrics::FixedThreshold{0.5};
  EXPECT_NO_THROW(p.validate());
  const auto back = parse_plan(serialize_plan(p));
  EXPECT_EQ(serialize_plan(back), serialize_plan(p));
  EXPECT_EQ(plan_fingerprint(back), plan_fingerprint(p));
  EXPECT_EQ(parse_plans(serialize_plans({p, p})).size(), 2u);

  auto more_shots = p;
  more_shots.shots = {0, 1, 2};
  EXPECT_EQ(plan_fingerprint(more_shots), plan_fingerprint(p));
  auto other_seed = p;
  other_seed.seed = 1;
  EXPECT_NE(plan_fingerprint(other_seed), plan_fingerprint(p));

  auto bad = p;
  bad.scenario = Scenario::UnknownPAI;
  EXPECT_THROW(bad.validate(), Error);
  bad = p;
  bad.scenario = Scenario::CrossDatabase;
  EXPECT_THROW(bad.validate(), Error);
  bad = p;
  bad.shots = {1, 1};
  EXPECT_THROW(bad.validate(), Error);
  bad = p;
  bad.shots = {10};
  EXPECT_THROW(bad.validate(), Error);
}

class RunPlanTest : public ::testing::Test {
 protected:
  RunPlanTest()
      : manifests_{testing::small_manifest("d", Task::PAD,
                                           {{"bona_fide", {5, 20}}, {"print", {5, 10}}, {"replay", {5, 10}}})},
        truth_(MockBackend::ground_truth_from(manifests_)) {}

  ExperimentPlan plan(std::vector<int> shots) const {
    ExperimentPlan p;
    p.demo_source = {"d", Split::Train, {"print", "replay"}, std::nullopt};
    p.test_target = {"d", Split::Test, {"print"}, std::nullopt};
    p.shots = std::move(shots);
    p.model = "mock";
    p.k_repeats = 3;
    return p;
  }
  RunContext ctx(Backend& b) const {
    RunContext c;
    c.manifests = &manifests_;
    c.backend = &b;
    c.results_dir = dir_.path();
    return c;
  }

  testing::TempDir dir_;
  std::vector<DatasetManifest> manifests_;
  std::map<std::string, Label> truth_;
};

TEST_F(RunPlanTest, NoiselessSweepAndLayout) {
  MockBackend mock(truth_, 0.0, 0.0, 1);
  const auto results = run_plan(plan({0, 1}), ctx(mock));
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[0].n_shots, 0);
  EXPECT_EQ(results[1].n_shots, 1);
  for (const auto& r : results) {
    ASSERT_TRUE(r.ok()) << *r.error;
    EXPECT_EQ(r.report.d_eer, 0.0);
    EXPECT_EQ(r.scores.size(), 30u);  // 20 bona fide + 10 print
    EXPECT_FALSE(r.resumed);
    const auto cell = dir_.path() / r.plan_fingerprint / std::to_string(r.n_shots);
    EXPECT_TRUE(std::filesystem::exists(cell / "scores.csv"));
    EXPECT_TRUE(std::filesystem::exists(cell / "report.json"));
    EXPECT_TRUE(std::filesystem::exists(cell / "demoset.json"));
    for (const auto& row : r.scores) EXPECT_FALSE(r.demoset.contains(row.score.sample_id));
  }
  EXPECT_EQ(results[1].demoset.entries.size(), 3u);
  EXPECT_EQ(mock.calls(), 2u * 30 * 3);
  EXPECT_EQ(plan_fingerprint(parse_plan(read_file(dir_.path() / results[0].plan_fingerprint / "plan.json"))),
            results[0].plan_fingerprint);
}

TEST_F(RunPlanTest, ResumeAndFresh) {
  MockBackend first(truth_, 0.3, 0.2, 5);
  const auto a = run_plan(plan({0, 3}), ctx(first));
  const auto before = testing::snapshot_tree(dir_.path());

  MockBackend second(truth_, 0.3, 0.2, 5);
  const auto b = run_plan(plan({0, 3}), ctx(second));
  EXPECT_EQ(second.calls(), 0u);
  EXPECT_TRUE(b[0].resumed);
  EXPECT_EQ(b[1].report, a[1].report);
  EXPECT_EQ(testing::snapshot_tree(dir_.path()), before);

  // Extending the shot list only computes the new cell.
  MockBackend third(truth_, 0.3, 0.2, 5);
  const auto c = run_plan(plan({0, 3, 5}), ctx(third));
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(third.calls(), 30u * 3);

  MockBackend fourth(truth_, 0.3, 0.2, 5);
  auto fresh = ctx(fourth);
  fresh.fresh = true;
  run_plan(plan({0}), fresh);
  EXPECT_EQ(fourth.calls(), 30u * 3);
  EXPECT_FALSE(std::filesystem::exists(dir_.path() / a[0].plan_fingerprint / "3"));
}

TEST_F(RunPlanTest, FailingCellIsIsolated) {
  FunctionBackend flaky([](const PromptObject& p, int) -> std::string {
    if (!p.demoset_fingerprint.empty() && p.messages.size() > 1) {
      throw Error(ErrorCode::BackendUnreachable, "down");
    }
    return "Yes";
  });
  const auto results = run_plan(plan({0, 1}), ctx(flaky));
  ASSERT_EQ(results.size(), 2u);
  EXPECT_TRUE(results[0].ok());
  ASSERT_FALSE(results[1].ok());
  EXPECT_EQ(results[1].error_code, ErrorCode::BackendUnreachable);
  const auto failed = nlohmann::json::parse(
      read_file(dir_.path() / results[1].plan_fingerprint / "1" / "failed.json"));
  EXPECT_EQ(failed["error"], "BackendUnreachable");
  EXPECT_FALSE(std::filesystem::exists(dir_.path() / results[1].plan_fingerprint / "1" / "report.json"));

  const auto loaded = load_results(dir_.path());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].n_shots, 0);
}

TEST_F(RunPlanTest, ConcurrencyDoesNotChangeOutput) {
  MockBackend a(truth_, 0.4, 0.4, 3);
  auto c1 = ctx(a);
  c1.max_concurrent = 1;
  run_plan(plan({1}), c1);
  const auto serial = testing::snapshot_tree(dir_.path());

  testing::TempDir other;
  MockBackend b(truth_, 0.4, 0.4, 3);
  auto c2 = ctx(b);
  c2.results_dir = other.path();
  c2.max_concurrent = 8;
  run_plan(plan({1}), c2);
  EXPECT_EQ(testing::snapshot_tree(other.path()), serial);
}

TEST(UnknownPai, PersistedArtifactsAreSeparated) {
  testing::TempDir dir;
  const std::vector<DatasetManifest> m{testing::casia_like()};
  EnumerateOptions opt;
  opt.shots = {1, 3};
  opt.frame_budget = 1;
  MockBackend mock(MockBackend::ground_truth_from(m), 0.1, 0.1, 42);
  RunContext ctx;
  ctx.manifests = &m;
  ctx.backend = &mock;
  ctx.results_dir = dir.path();
  for (const auto& p : enumerate_plans(m, Task::PAD, Scenario::UnknownPAI, opt)) run_plan(p, ctx);

  const auto results = load_results(dir.path());
  EXPECT_EQ(results.size(), 18u);
  for (const auto& r : results) {
    const auto demo = parse_demoset(read_file(dir.path() / r.plan_fingerprint / std::to_string(r.n_shots) /
                                              "demoset.json"));
    for (const auto& t : r.testing()) EXPECT_FALSE(demo.attack_categories().count(t));
    for (const auto& row : r.scores) EXPECT_FALSE(demo.contains(row.score.sample_id));
  }
}

RunResult synthetic(const std::string& testing_cat, std::vector<std::string> refs, int shots, double d_eer) {
  RunResult r;
  r.plan.test_target = {"d", Split::Test, {testing_cat}, std::nullopt};
  r.plan.demo_source = {"d", Split::Train, {refs.begin(), refs.end()}, std::nullopt};
  r.plan_fingerprint = plan_fingerprint(r.plan);
  r.n_shots = shots;
  r.report.d_eer = d_eer;
  r.report.bpcer10 = d_eer + 0.1;
  r.report.bpcer20 = d_eer + 0.2;
  r.report.bpcer100 = d_eer + 0.3;
  return r;
}

TEST(SelectBest, ArgminAndTieBreaks) {
  const std::vector<RunResult> rs{synthetic("cut", {"cut"}, 1, 0.2), synthetic("cut", {"cut", "video"}, 3, 0.1),
                                  synthetic("video", {"video"}, 5, 0.1), synthetic("video", {"video"}, 3, 0.1),
                                  synthetic("warp", {"warp", "video"}, 1, 0.3), synthetic("warp", {"warp"}, 1, 0.3)};
  const auto best = select_best(rs);
  ASSERT_EQ(best.size(), 3u);
  EXPECT_EQ(best.at("d:cut").n_shots, 3);
  EXPECT_EQ(best.at("d:video").n_shots, 3);
  EXPECT_EQ(best.at("d:warp").references(), (std::vector<std::string>{"video", "warp"}));
  EXPECT_EQ(select_best(rs, Criterion::Bpcer100).at("d:cut").n_shots, 3);

  std::vector<RunResult> failed{synthetic("cut", {"cut"}, 1, 0.2)};
  failed[0].error = "boom";
  try {
    select_best(failed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGroup);
  }
}

TEST(ShotTrend, MeansAndSlope) {
  std::vector<RunResult> rs{synthetic("a", {"a"}, 1, 0.2), synthetic("b", {"b"}, 1, 0.4)};
  for (int s : {0, 3, 5, 7, 9}) rs.push_back(synthetic("a", {"a"}, s, 0.1 + 0.02 * s));
  rs.push_back(synthetic("a", {"a"}, 3, 0.1 + 0.02 * 3));
  const auto trend = shot_trend(rs);
  EXPECT_DOUBLE_EQ(trend.at(1).d_eer, 0.3);
  EXPECT_EQ(trend.at(1).n_results, 2u);
  EXPECT_EQ(trend.at(3).n_results, 2u);
  for (int s : {0, 3, 5, 7, 9}) {
    EXPECT_NEAR(trend.at(s).d_eer, 0.1 + 0.02 * s, 1e-15);
    EXPECT_NEAR(trend.at(s).bpcer100, 0.4 + 0.02 * s, 1e-15);
  }
  EXPECT_NEAR((trend.at(9).d_eer - trend.at(0).d_eer) / 9.0, 0.02, 1e-15);
}

}  // namespace
}  // namespace icleval
