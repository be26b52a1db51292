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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "icleval/demoset.hpp"
#include "icleval/inference.hpp"
#include "icleval/manifest.hpp"
#include "icleval/prompt.hpp"

namespace icleval {

/// Per-sample score: the fraction of queries answered bona fide.
/// Unparseable answers count as attack votes and are also tallied apart.
struct SampleScore {
  std::string sample_id;
  double score = 0.0;
  int votes_bp = 0;
  int votes_attack = 0;
  int votes_unparseable = 0;
  int n_queries = 0;

  friend bool operator==(const SampleScore&, const SampleScore&) = default;
};

SampleScore aggregate_votes(const std::string& sample_id, std::span<const Vote> votes);
SampleScore aggregate_votes(const std::string& sample_id, std::span<const BinaryVote> votes);

struct ScoringOptions {
  int k_repeats = 5;     // queries per still image
  int frame_budget = 5;  // frames sampled per video
};

/// Queries one prompt per sampled frame of a video, or the same prompt
/// k_repeats times for an image (query_index 0..K-1), then aggregates.
/// Throws DemoLeak if the record is itself a demonstration; backend errors
/// are rethrown with the sample id attached.
SampleScore score_sample(const SampleRecord& record, const DemonstrationSet& demoset,
                         const PromptTemplate& tmpl, Backend& backend,
                         const ScoringOptions& options = {});

/// One row of the persisted score stream.
struct ScoreRow {
  std::string dataset;
  Split split = Split::Test;
  Label label = Label::BonaFide;
  std::string category;
  int n_shots = 0;
  std::uint64_t seed = 0;
  SampleScore score;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

inline constexpr std::string_view kScoreCsvHeader =
    "sample_id,dataset,split,label,category,n_shots,seed,score,votes_bp,votes_attack,"
    "votes_unparseable,n_queries";

std::string write_scores_csv(std::span<const ScoreRow> rows);
/// Throws MalformedScoreRow naming the 1-based line on any bad row,
/// including scores outside [0, 1] or tallies that do not add up.
std::vector<ScoreRow> read_scores_csv(std::istream& in);
std::vector<ScoreRow> read_scores_csv(const std::string& text);

}  // namespace icleval
