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

#include "icleval/common.hpp"

#include <algorithm>
#include <cctype>

namespace icleval {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::TemplateMismatch: return "TemplateMismatch";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::UnknownSample: return "UnknownSample";
    case ErrorCode::EmptyVoteList: return "EmptyVoteList";
    case ErrorCode::DemoLeak: return "DemoLeak";
    case ErrorCode::MalformedScoreRow: return "MalformedScoreRow";
    case ErrorCode::NoAttacks: return "NoAttacks";
    case ErrorCode::NoBonaFide: return "NoBonaFide";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::MissingDevSet: return "MissingDevSet";
    case ErrorCode::InsufficientDatasets: return "InsufficientDatasets";
    case ErrorCode::EmptyCategorySpace: return "EmptyCategorySpace";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::EmptyCurve: return "EmptyCurve";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NoResults: return "NoResults";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

CategoryId::CategoryId(Task t, std::string_view n) : task(t), name(to_lower(trim(n))) {}

std::string_view to_string(Task t) { return t == Task::PAD ? "pad" : "smad"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "test";
}

std::string_view to_string(Label l) { return l == Label::BonaFide ? "bona_fide" : "attack"; }

std::optional<Task> parse_task(std::string_view s) {
  const auto v = to_lower(s);
  if (v == "pad") return Task::PAD;
  if (v == "smad") return Task::SMAD;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "bona_fide") return Label::BonaFide;
  if (s == "attack") return Label::Attack;
  return std::nullopt;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace icleval
