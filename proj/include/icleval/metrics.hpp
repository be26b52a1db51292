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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icleval/common.hpp"

// Error rates for attack detection, after ISO/IEC 30107-3 (PAD) and
// ISO/IEC 20059 (morphing). Throughout, a sample is accepted as bona fide
// iff score >= threshold.
namespace icleval::metrics {

struct ScoreEntry {
  double score = 0.0;
  Label label = Label::BonaFide;
  std::string category;
};

/// Scores in [0, 1] with labels. Construction rejects non-finite or
/// out-of-range scores.
class ScoreSet {
 public:
  ScoreSet() = default;
  explicit ScoreSet(std::vector<ScoreEntry> entries);

  const std::vector<ScoreEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t n_attack() const { return n_attack_; }
  std::size_t n_bona_fide() const { return entries_.size() - n_attack_; }

 private:
  std::vector<ScoreEntry> entries_;
  std::size_t n_attack_ = 0;
};

struct DetPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

/// Threshold just above every valid score, so nothing is accepted.
double upper_threshold();

/// Fraction of attacks (optionally of one category) accepted at threshold.
double apcer_at(const ScoreSet& s, double threshold, const std::optional<std::string>& category = {});
/// Fraction of bona fide samples rejected at threshold.
double bpcer_at(const ScoreSet& s, double threshold);

/// One point per candidate threshold in {distinct scores} plus 0 and
/// upper_threshold(), ascending.
std::vector<DetPoint> det_curve(const ScoreSet& s);

struct EqualErrorPoint {
  double rate = 0.0;
  double threshold = 0.0;
};

/// Where APCER and BPCER cross, linearly interpolated in threshold between
/// the adjacent curve points that bracket the sign change.
EqualErrorPoint d_eer(std::span<const DetPoint> det);

/// BPCER at the smallest threshold whose APCER <= target; 1.0 when none.
/// Targets 0.10, 0.05 and 0.01 give BPCER10, BPCER20 and BPCER100.
double bpcer_at_apcer(std::span<const DetPoint> det, double target);

struct EerOnSelf {};
struct FixedThreshold {
  double threshold;
};
struct EerOnDev {};
using ThresholdPolicy = std::variant<EerOnSelf, FixedThreshold, EerOnDev>;

struct HalfTotalError {
  double hter = 0.0;
  double threshold = 0.0;
};

/// (APCER + BPCER) / 2 at the policy's threshold. EerOnDev takes the D-EER
/// threshold of dev and throws MissingDevSet without one.
HalfTotalError hter(const ScoreSet& s, const ThresholdPolicy& policy,
                    const ScoreSet* dev = nullptr);

/// Trapezoidal area under TPR = 1 - BPCER against FPR = APCER over the
/// det_curve thresholds. Ties count half, as in the pairwise definition.
double auc(const ScoreSet& s);

struct MetricReport {
  double d_eer = 0.0;
  double d_eer_threshold = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  double hter = 0.0;
  double hter_threshold = 0.0;
  double auc = 0.0;
  std::size_t n_bona_fide = 0;
  std::size_t n_attack = 0;
  std::vector<DetPoint> det;
  /// Informational, at the D-EER threshold.
  std::map<std::string, double> per_category_apcer;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport compute_report(const ScoreSet& s, const ThresholdPolicy& policy = EerOnSelf{},
                            const ScoreSet* dev = nullptr);

/// Generating context persisted alongside a report.
struct ReportContext {
  std::string model;
  std::vector<std::string> references;
  std::vector<std::string> testing;
  int shots = 0;
  std::uint64_t seed = 0;
  double parse_failure_rate = 0.0;
  std::string threshold_policy = "eer_on_self";
};

std::string serialize_report(const MetricReport& r, const ReportContext& ctx);
MetricReport parse_report(const std::string& json_text, ReportContext* ctx = nullptr);
/// threshold,apcer,bpcer with a header line.
std::string det_csv(std::span<const DetPoint> det);

std::string policy_name(const ThresholdPolicy& p);

}  // namespace icleval::metrics
