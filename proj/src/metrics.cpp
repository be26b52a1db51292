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

#include "icleval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "icleval/util.hpp"

namespace icleval::metrics {

namespace {

using nlohmann::ordered_json;

void require_both_labels(const ScoreSet& s) {
  if (s.n_attack() == 0) throw Error(ErrorCode::NoAttacks, "score set has no attack samples");
  if (s.n_bona_fide() == 0) throw Error(ErrorCode::NoBonaFide, "score set has no bona fide samples");
}

std::vector<double> sorted_scores(const ScoreSet& s, Label label) {
  std::vector<double> out;
  for (const auto& e : s.entries()) {
    if (e.label == label) out.push_back(e.score);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ScoreSet::ScoreSet(std::vector<ScoreEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!std::isfinite(e.score) || e.score < 0.0 || e.score > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "score outside [0, 1]: " + format_double(e.score));
    }
    n_attack_ += e.label == Label::Attack ? 1 : 0;
  }
}

double upper_threshold() { return std::nextafter(1.0, 2.0); }

double apcer_at(const ScoreSet& s, double threshold, const std::optional<std::string>& category) {
  std::size_t total = 0;
  std::size_t accepted = 0;
  for (const auto& e : s.entries()) {
    if (e.label != Label::Attack || (category && e.category != *category)) continue;
    ++total;
    accepted += e.score >= threshold ? 1 : 0;
  }
  if (total == 0) {
    throw Error(ErrorCode::NoAttacks, category ? "no attacks in category " + *category
                                               : std::string("score set has no attack samples"));
  }
  return static_cast<double>(accepted) / static_cast<double>(total);
}

double bpcer_at(const ScoreSet& s, double threshold) {
  std::size_t total = 0;
  std::size_t rejected = 0;
  for (const auto& e : s.entries()) {
    if (e.label != Label::BonaFide) continue;
    ++total;
    rejected += e.score < threshold ? 1 : 0;
  }
  if (total == 0) throw Error(ErrorCode::NoBonaFide, "score set has no bona fide samples");
  return static_cast<double>(rejected) / static_cast<double>(total);
}

std::vector<DetPoint> det_curve(const ScoreSet& s) {
  require_both_labels(s);
  const auto attacks = sorted_scores(s, Label::Attack);
  const auto bona_fide = sorted_scores(s, Label::BonaFide);

  std::vector<double> thresholds{0.0, upper_threshold()};
  for (const auto& e : s.entries()) thresholds.push_back(e.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto n_att = static_cast<double>(attacks.size());
  const auto n_bp = static_cast<double>(bona_fide.size());
  std::vector<DetPoint> det;
  det.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto att_below = std::lower_bound(attacks.begin(), attacks.end(), t) - attacks.begin();
    const auto bp_below = std::lower_bound(bona_fide.begin(), bona_fide.end(), t) - bona_fide.begin();
    det.push_back(DetPoint{t, static_cast<double>(static_cast<std::ptrdiff_t>(attacks.size()) - att_below) / n_att,
                           static_cast<double>(bp_below) / n_bp});
  }
  return det;
}

EqualErrorPoint d_eer(std::span<const DetPoint> det) {
  for (std::size_t i = 0; i < det.size(); ++i) {
    const double gap = det[i].apcer - det[i].bpcer;
    if (gap == 0.0) return {det[i].apcer, det[i].threshold};
    if (i + 1 == det.size()) break;
    const double next_gap = det[i + 1].apcer - det[i + 1].bpcer;
    if (gap > 0.0 && next_gap < 0.0) {
      const double frac = gap / (gap - next_gap);
      return {det[i].apcer + frac * (det[i + 1].apcer - det[i].apcer),
              det[i].threshold + frac * (det[i + 1].threshold - det[i].threshold)};
    }
  }
  throw Error(ErrorCode::DegenerateCurve, "APCER and BPCER never cross");
}

double bpcer_at_apcer(std::span<const DetPoint> det, double target) {
  if (!(target > 0.0 && target <= 1.0)) {
    throw Error(ErrorCode::InvalidTarget, "APCER target must lie in (0, 1]");
  }
  for (const auto& p : det) {
    if (p.apcer <= target) return p.bpcer;
  }
  return 1.0;
}

HalfTotalError hter(const ScoreSet& s, const ThresholdPolicy& policy, const ScoreSet* dev) {
  double threshold = 0.0;
  if (std::holds_alternative<FixedThreshold>(policy)) {
    threshold = std::get<FixedThreshold>(policy).threshold;
  } else if (std::holds_alternative<EerOnDev>(policy)) {
    if (dev == nullptr) throw Error(ErrorCode::MissingDevSet, "eer_on_dev policy needs a dev score set");
    threshold = d_eer(det_curve(*dev)).threshold;
  } else {
    threshold = d_eer(det_curve(s)).threshold;
  }
  return {(apcer_at(s, threshold) + bpcer_at(s, threshold)) / 2.0, threshold};
}

double auc(const ScoreSet& s) {
  const auto det = det_curve(s);
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < det.size(); ++i) {
    const double width = det[i].apcer - det[i + 1].apcer;
    area += width * ((1.0 - det[i].bpcer) + (1.0 - det[i + 1].bpcer)) / 2.0;
  }
  return area;
}

MetricReport compute_report(const ScoreSet& s, const ThresholdPolicy& policy, const ScoreSet* dev) {
  MetricReport r;
  r.det = det_curve(s);
  const auto eer = d_eer(r.det);
  r.d_eer = eer.rate;
  r.d_eer_threshold = eer.threshold;
  r.bpcer10 = bpcer_at_apcer(r.det, 0.10);
  r.bpcer20 = bpcer_at_apcer(r.det, 0.05);
  r.bpcer100 = bpcer_at_apcer(r.det, 0.01);
  const auto ht = hter(s, policy, dev);
  r.hter = ht.hter;
  r.hter_threshold = ht.threshold;
  r.auc = auc(s);
  r.n_bona_fide = s.n_bona_fide();
  r.n_attack = s.n_attack();
  for (const auto& e : s.entries()) {
    if (e.label == Label::Attack && !r.per_category_apcer.count(e.category)) {
      r.per_category_apcer[e.category] = apcer_at(s, eer.threshold, e.category);
    }
  }
  return r;
}

std::string policy_name(const ThresholdPolicy& p) {
  if (const auto* f = std::get_if<FixedThreshold>(&p)) return "fixed(" + format_double(f->threshold) + ")";
  if (std::holds_alternative<EerOnDev>(p)) return "eer_on_dev";
  return "eer_on_self";
}

std::string serialize_report(const MetricReport& r, const ReportContext& ctx) {
  ordered_json j;
  j["context"] = ordered_json{{"model", ctx.model},
                              {"references", ctx.references},
                              {"testing", ctx.testing},
                              {"shots", ctx.shots},
                              {"seed", ctx.seed},
                              {"threshold_policy", ctx.threshold_policy},
                              {"parse_failure_rate", ctx.parse_failure_rate}};
  j["d_eer"] = r.d_eer;
  j["d_eer_threshold"] = r.d_eer_threshold;
  j["bpcer10"] = r.bpcer10;
  j["bpcer20"] = r.bpcer20;
  j["bpcer100"] = r.bpcer100;
  j["hter"] = r.hter;
  j["hter_threshold"] = r.hter_threshold;
  j["auc"] = r.auc;
  j["n_bona_fide"] = r.n_bona_fide;
  j["n_attack"] = r.n_attack;
  j["per_category_apcer"] = ordered_json::object();
  for (const auto& [k, v] : r.per_category_apcer) j["per_category_apcer"][k] = v;
  j["det"] = ordered_json::array();
  for (const auto& p : r.det) {
    j["det"].push_back(ordered_json{{"threshold", p.threshold}, {"apcer", p.apcer}, {"bpcer", p.bpcer}});
  }
  return j.dump(2) + "\n";
}

MetricReport parse_report(const std::string& json_text, ReportContext* ctx) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    MetricReport r;
    r.d_eer = j.at("d_eer").get<double>();
    r.d_eer_threshold = j.at("d_eer_threshold").get<double>();
    r.bpcer10 = j.at("bpcer10").get<double>();
    r.bpcer20 = j.at("bpcer20").get<double>();
    r.bpcer100 = j.at("bpcer100").get<double>();
    r.hter = j.at("hter").get<double>();
    r.hter_threshold = j.at("hter_threshold").get<double>();
    r.auc = j.at("auc").get<double>();
    r.n_bona_fide = j.at("n_bona_fide").get<std::size_t>();
    r.n_attack = j.at("n_attack").get<std::size_t>();
    for (const auto& [k, v] : j.at("per_category_apcer").items()) r.per_category_apcer[k] = v.get<double>();
    for (const auto& p : j.at("det")) {
      r.det.push_back(DetPoint{p.at("threshold").get<double>(), p.at("apcer").get<double>(),
                               p.at("bpcer").get<double>()});
    }
    if (ctx != nullptr) {
      const auto& c = j.at("context");
      ctx->model = c.at("model").get<std::string>();
      ctx->references = c.at("references").get<std::vector<std::string>>();
      ctx->testing = c.at("testing").get<std::vector<std::string>>();
      ctx->shots = c.at("shots").get<int>();
      ctx->seed = c.at("seed").get<std::uint64_t>();
      ctx->threshold_policy = c.at("threshold_policy").get<std::string>();
      ctx->parse_failure_rate = c.at("parse_failure_rate").get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("report JSON: ") + e.what());
  }
}

std::string det_csv(std::span<const DetPoint> det) {
  std::string out = "threshold,apcer,bpcer\n";
  for (const auto& p : det) {
    out += format_double(p.threshold) + "," + format_double(p.apcer) + "," + format_double(p.bpcer) + "\n";
  }
  return out;
}

}  // namespace icleval::metrics
