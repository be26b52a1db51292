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

#include "icleval/scoring.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include "icleval/util.hpp"

namespace icleval {

namespace {

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && end == s.data() + s.size();
}

[[noreturn]] void bad_row(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedScoreRow, "line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

SampleScore aggregate_votes(const std::string& sample_id, std::span<const Vote> votes) {
  if (votes.empty()) throw Error(ErrorCode::EmptyVoteList, sample_id);
  SampleScore s;
  s.sample_id = sample_id;
  for (Vote v : votes) {
    switch (v) {
      case Vote::BonaFide: ++s.votes_bp; break;
      case Vote::Attack: ++s.votes_attack; break;
      case Vote::Unparseable:
        ++s.votes_attack;
        ++s.votes_unparseable;
        break;
    }
  }
  s.n_queries = static_cast<int>(votes.size());
  s.score = static_cast<double>(s.votes_bp) / static_cast<double>(s.n_queries);
  return s;
}

SampleScore aggregate_votes(const std::string& sample_id, std::span<const BinaryVote> votes) {
  std::vector<Vote> values;
  values.reserve(votes.size());
  for (const auto& v : votes) values.push_back(v.value);
  return aggregate_votes(sample_id, values);
}

SampleScore score_sample(const SampleRecord& record, const DemonstrationSet& demoset,
                         const PromptTemplate& tmpl, Backend& backend,
                         const ScoringOptions& options) {
  if (demoset.contains(record.sample_id)) throw Error(ErrorCode::DemoLeak, record.sample_id);
  if (options.k_repeats < 1 || options.frame_budget < 1) {
    throw Error(ErrorCode::InvalidArgument, "k_repeats and frame_budget must be >= 1");
  }

  // (query image, query index) pairs.
  std::vector<std::pair<std::string, int>> queries;
  if (const auto* img = std::get_if<ImageMedia>(&record.media)) {
    for (int k = 0; k < options.k_repeats; ++k) queries.emplace_back(img->path, k);
  } else {
    const auto& frames = std::get<VideoFrames>(record.media).paths;
    const auto sel = sample_frame_indices(frames.size(), static_cast<std::size_t>(options.frame_budget));
    int j = 0;
    for (auto idx : sel.indices) queries.emplace_back(frames[idx], j++);
  }

  std::vector<BinaryVote> votes;
  votes.reserve(queries.size());
  try {
    for (const auto& [image, index] : queries) {
      const auto prompt = assemble_prompt(demoset, record.sample_id, image, tmpl);
      votes.push_back(classify(prompt, backend, index));
    }
  } catch (const Error& e) {
    throw Error(e.code(), "sample " + record.sample_id + ": " + e.detail());
  }
  return aggregate_votes(record.sample_id, votes);
}

std::string write_scores_csv(std::span<const ScoreRow> rows) {
  std::string out(kScoreCsvHeader);
  out.push_back('\n');
  for (const auto& r : rows) {
    const std::vector<std::string> fields{r.score.sample_id,
                                          r.dataset,
                                          std::string(to_string(r.split)),
                                          std::string(to_string(r.label)),
                                          r.category,
                                          std::to_string(r.n_shots),
                                          std::to_string(r.seed),
                                          format_double(r.score.score),
                                          std::to_string(r.score.votes_bp),
                                          std::to_string(r.score.votes_attack),
                                          std::to_string(r.score.votes_unparseable),
                                          std::to_string(r.score.n_queries)};
    out += csv_join(fields);
    out.push_back('\n');
  }
  return out;
}

std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) bad_row(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoreCsvHeader) bad_row(1, "unexpected header");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f;
    try {
      f = csv_split(line);
    } catch (const Error&) {
      bad_row(line_no, "unterminated quote");
    }
    if (f.size() != 12) bad_row(line_no, "expected 12 fields, got " + std::to_string(f.size()));
    ScoreRow r;
    r.score.sample_id = f[0];
    r.dataset = f[1];
    if (r.score.sample_id.empty()) bad_row(line_no, "empty sample_id");
    auto split = parse_split(f[2]);
    auto label = parse_label(f[3]);
    if (!split) bad_row(line_no, "bad split '" + f[2] + "'");
    if (!label) bad_row(line_no, "bad label '" + f[3] + "'");
    r.split = *split;
    r.label = *label;
    r.category = f[4];
    if (r.category.empty()) bad_row(line_no, "empty category");
    if (!parse_number(f[5], r.n_shots) || !parse_number(f[6], r.seed) ||
        !parse_number(f[7], r.score.score) || !parse_number(f[8], r.score.votes_bp) ||
        !parse_number(f[9], r.score.votes_attack) ||
        !parse_number(f[10], r.score.votes_unparseable) || !parse_number(f[11], r.score.n_queries)) {
      bad_row(line_no, "non-numeric field");
    }
    const auto& s = r.score;
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0) {
      bad_row(line_no, "score " + f[7] + " outside [0, 1]");
    }
    if (s.n_queries < 1 || s.votes_bp < 0 || s.votes_unparseable < 0 ||
        s.votes_bp + s.votes_attack != s.n_queries || s.votes_unparseable > s.votes_attack) {
      bad_row(line_no, "inconsistent vote tallies");
    }
    if (std::abs(s.score - static_cast<double>(s.votes_bp) / s.n_queries) > 1e-9) {
      bad_row(line_no, "score " + f[7] + " does not equal votes_bp / n_queries");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ScoreRow> read_scores_csv(const std::string& text) {
  std::istringstream in(text);
  return read_scores_csv(in);
}

}  // namespace icleval
