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

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "icleval/metrics.hpp"
#include "oracles.hpp"

namespace icleval::metrics {
namespace {

ScoreSet make(std::vector<double> bp, std::vector<double> att, const std::string& cat = "print") {
  std::vector<ScoreEntry> e;
  for (double s : bp) e.push_back({s, Label::BonaFide, "bona_fide"});
  for (double s : att) e.push_back({s, Label::Attack, cat});
  return ScoreSet(std::move(e));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

TEST(Rates, CountingDefinitions) {
  const auto s = make({0.2, 0.4, 0.6, 0.8}, {0.0, 0.1, 0.2, 0.3, 0.4, 0.4, 0.5, 0.55, 0.6, 0.9});
  EXPECT_DOUBLE_EQ(apcer_at(s, 0.6), 0.2);
  EXPECT_DOUBLE_EQ(apcer_at(s, 1.5), 0.0);
  EXPECT_DOUBLE_EQ(apcer_at(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(bpcer_at(s, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(bpcer_at(s, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(bpcer_at(s, upper_threshold()), 1.0);
  EXPECT_DOUBLE_EQ(apcer_at(s, upper_threshold()), 0.0);
}

TEST(Rates, PerCategory) {
  std::vector<ScoreEntry> e{{0.9, Label::BonaFide, "bona_fide"}, {0.8, Label::Attack, "print"},
                            {0.2, Label::Attack, "print"},       {0.6, Label::Attack, "replay"},
                            {0.4, Label::Attack, "replay"},      {0.0, Label::Attack, "replay"}};
  const ScoreSet s(e);
  // By hand at 0.5: print accepts 0.8 (1 of 2), replay accepts 0.6 (1 of 3).
  EXPECT_DOUBLE_EQ(apcer_at(s, 0.5, std::string("print")), 0.5);
  EXPECT_DOUBLE_EQ(apcer_at(s, 0.5, std::string("replay")), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(apcer_at(s, 0.5), 0.4);
  EXPECT_EQ(code_of([&] { apcer_at(s, 0.5, std::string("mask")); }), ErrorCode::NoAttacks);
  EXPECT_EQ(code_of([] { bpcer_at(make({}, {0.1}), 0.5); }), ErrorCode::NoBonaFide);
  EXPECT_EQ(code_of([] { ScoreSet({{1.5, Label::Attack, "x"}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { ScoreSet({{std::nan(""), Label::Attack, "x"}}); }), ErrorCode::InvalidArgument);
}

TEST(DetCurve, PerfectSeparationAndDegenerate) {
  const auto perfect = det_curve(make({1.0}, {0.0}));
  bool origin = false;
  for (const auto& p : perfect) origin = origin || (p.apcer == 0.0 && p.bpcer == 0.0);
  EXPECT_TRUE(origin);

  const auto flat = det_curve(make({0.5, 0.5}, {0.5}));
  ASSERT_EQ(flat.size(), 3u);
  EXPECT_EQ(flat[0], (DetPoint{0.0, 1.0, 0.0}));
  EXPECT_EQ(flat[1], (DetPoint{0.5, 1.0, 0.0}));
  EXPECT_EQ(flat[2], (DetPoint{upper_threshold(), 0.0, 1.0}));
}

TEST(DetCurve, MatchesBruteForceSweep) {
  const auto s = make({0.2, 0.6, 1.0}, {0.0, 0.6, 0.8});
  const auto det = det_curve(s);
  const auto v = oracle::flatten(s);
  const auto ts = oracle::thresholds(v);
  ASSERT_EQ(det.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto [a, b] = oracle::rates(v, ts[i]);
    EXPECT_EQ(det[i].threshold, ts[i]);
    EXPECT_EQ(det[i].apcer, a);
    EXPECT_EQ(det[i].bpcer, b);
    if (i > 0) {
      EXPECT_LE(det[i].apcer, det[i - 1].apcer);
      EXPECT_GE(det[i].bpcer, det[i - 1].bpcer);
    }
  }
}

TEST(DEer, SeparatedAndInverted) {
  EXPECT_DOUBLE_EQ(d_eer(det_curve(make({0.8, 1.0}, {0.0, 0.2}))).rate, 0.0);
  EXPECT_DOUBLE_EQ(d_eer(det_curve(make({0.0, 0.2}, {0.8, 1.0}))).rate, 1.0);
}

TEST(DEer, ExactCrossingAndInterpolation) {
  // Thresholds 0, 0.4, 0.6, 1+: gaps +1, +1, 0, -1. The crossing is the 0.6 point itself.
  const auto exact = d_eer(det_curve(make({0.4, 0.6}, {0.4, 0.6})));
  EXPECT_DOUBLE_EQ(exact.rate, 0.5);
  EXPECT_DOUBLE_EQ(exact.threshold, 0.6);
  // Thresholds 0, 0.2, 0.6, 0.8, 1+: gaps +1, +1, +0.5, -0.5, -1. Halfway
  // between 0.6 (0.5, 0) and 0.8 (0, 0.5).
  const auto mid = d_eer(det_curve(make({0.6, 0.8}, {0.2, 0.6})));
  EXPECT_DOUBLE_EQ(mid.rate, 0.25);
  EXPECT_DOUBLE_EQ(mid.threshold, 0.7);
  EXPECT_EQ(code_of([] {
              std::vector<DetPoint> det{{0.0, 0.2, 0.3}, {1.0, 0.0, 0.5}};
              d_eer(det);
            }),
            ErrorCode::DegenerateCurve);
}

TEST(DEer, TwentyRandomScoresMatchOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> bp, att;
  for (int i = 0; i < 10; ++i) bp.push_back(u(rng));
  for (int i = 0; i < 10; ++i) att.push_back(u(rng) * 0.8);
  const auto s = make(bp, att);
  const auto rate = d_eer(det_curve(s)).rate;
  const auto candidates = oracle::eer_candidates(s);
  ASSERT_FALSE(candidates.empty());
  for (double c : candidates) EXPECT_NEAR(rate, c, 1e-9);
}

TEST(BpcerAtApcer, Examples) {
  EXPECT_DOUBLE_EQ(bpcer_at_apcer(det_curve(make({1.0}, {0.0})), 0.10), 0.0);
  const auto all_accepted = det_curve(make({0.4, 1.0}, {1.0, 1.0}));
  EXPECT_DOUBLE_EQ(bpcer_at_apcer(all_accepted, 0.01), 1.0);
  const auto s = make({0.2, 0.4, 0.4, 0.8, 1.0}, {0.0, 0.2, 0.4, 0.6, 1.0});
  EXPECT_DOUBLE_EQ(bpcer_at_apcer(det_curve(s), 0.05), oracle::bpcer_at_apcer(s, 0.05));
  EXPECT_DOUBLE_EQ(bpcer_at_apcer(det_curve(s), 0.2), oracle::bpcer_at_apcer(s, 0.2));
  EXPECT_EQ(code_of([&] { bpcer_at_apcer(det_curve(s), 0.0); }), ErrorCode::InvalidTarget);
  EXPECT_EQ(code_of([&] { bpcer_at_apcer(det_curve(s), 1.5); }), ErrorCode::InvalidTarget);
}

TEST(Hter, Policies) {
  EXPECT_DOUBLE_EQ(hter(make({1.0}, {0.0}), EerOnSelf{}).hter, 0.0);
  EXPECT_NEAR(hter(make({0.0, 0.2}, {0.8, 1.0}), EerOnSelf{}).hter, 1.0, 1e-9);
  // At 0.5: attacks {0.6, 0.2, 0.8} accept 2 of 3; BP {0.4, 0.9} reject 1 of 2.
  const auto s = make({0.4, 0.9}, {0.6, 0.2, 0.8});
  const auto h = hter(s, FixedThreshold{0.5});
  EXPECT_DOUBLE_EQ(h.hter, (2.0 / 3.0 + 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(h.threshold, 0.5);
  EXPECT_EQ(code_of([&] { hter(s, EerOnDev{}); }), ErrorCode::MissingDevSet);
  const auto dev = make({0.4, 0.6}, {0.4, 0.6});
  EXPECT_DOUBLE_EQ(hter(s, EerOnDev{}, &dev).threshold, 0.6);
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc(make({1.0}, {0.0})), 1.0);
  EXPECT_DOUBLE_EQ(auc(make({0.5, 0.5}, {0.5, 0.5, 0.5})), 0.5);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> grid(0, 10);
  std::vector<double> bp, att;
  for (int i = 0; i < 15; ++i) bp.push_back(grid(rng) / 10.0);
  for (int i = 0; i < 15; ++i) att.push_back(grid(rng) / 10.0);
  const auto s = make(bp, att);
  EXPECT_NEAR(auc(s), oracle::pairwise_auc(s), 1e-9);
}

TEST(Oracles, RandomGridScoresets) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_grid_scoreset(rng);
    const auto det = det_curve(s);
    const auto eer = d_eer(det).rate;
    for (double c : oracle::eer_candidates(s)) ASSERT_NEAR(eer, c, 1e-9) << "set " << i;
    for (double t : {0.10, 0.05, 0.01}) {
      ASSERT_NEAR(bpcer_at_apcer(det, t), oracle::bpcer_at_apcer(s, t), 1e-9) << "set " << i;
    }
    ASSERT_NEAR(auc(s), oracle::pairwise_auc(s), 1e-9) << "set " << i;
  }
}

TEST(Invariants, MonotoneTransformAndOrdering) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto s = oracle::random_grid_scoreset(rng, 30);
    std::vector<ScoreEntry> squashed = s.entries();
    for (auto& e : squashed) e.score = std::pow(e.score, 3.0) * 0.5 + 0.25;
    const auto a = compute_report(s);
    const auto b = compute_report(ScoreSet(squashed));
    EXPECT_NEAR(a.d_eer, b.d_eer, 1e-12);
    EXPECT_EQ(a.bpcer10, b.bpcer10);
    EXPECT_EQ(a.bpcer20, b.bpcer20);
    EXPECT_EQ(a.bpcer100, b.bpcer100);
    EXPECT_NEAR(a.auc, b.auc, 1e-12);
    EXPECT_GE(a.bpcer100, a.bpcer20);
    EXPECT_GE(a.bpcer20, a.bpcer10);
    EXPECT_GE(a.auc, 0.0);
    EXPECT_LE(a.auc, 1.0);
  }
}

TEST(Report, SerializeRoundTrip) {
  const auto s = make({0.2, 0.8, 1.0}, {0.0, 0.4, 0.8});
  const auto r = compute_report(s);
  ReportContext ctx;
  ctx.model = "mock";
  ctx.references = {"cut_attack"};
  ctx.testing = {"cut_attack"};
  ctx.shots = 3;
  ctx.seed = 42;
  ctx.parse_failure_rate = 0.25;
  const auto text = serialize_report(r, ctx);
  ReportContext back;
  EXPECT_EQ(parse_report(text, &back), r);
  EXPECT_EQ(back.model, "mock");
  EXPECT_EQ(back.references, ctx.references);
  EXPECT_EQ(back.shots, 3);
  EXPECT_EQ(back.parse_failure_rate, 0.25);
  EXPECT_EQ(serialize_report(parse_report(text), ctx), text);
  EXPECT_EQ(r.per_category_apcer.at("print"), apcer_at(s, r.d_eer_threshold));
  EXPECT_EQ(code_of([] { parse_report("{\"d_eer\": 0}"); }), ErrorCode::SchemaViolation);
}

TEST(Report, DetCsvAndPolicyNames) {
  const auto det = det_curve(make({1.0}, {0.0}));
  const auto csv = det_csv(det);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,apcer,bpcer");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(det.size() + 1));
  EXPECT_EQ(policy_name(EerOnSelf{}), "eer_on_self");
  EXPECT_EQ(policy_name(EerOnDev{}), "eer_on_dev");
  EXPECT_EQ(policy_name(FixedThreshold{0.5}), "fixed(0.5)");
}

}  // namespace
}  // namespace icleval::metrics
