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

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace icleval {

enum class Task { PAD, SMAD };
enum class Split { Train, Dev, Test };
enum class Label { BonaFide, Attack };

/// Name reserved for the bona fide class in both tasks.
inline constexpr std::string_view kBonaFide = "bona_fide";

/// Every failure the library reports. Codes are stable; tests and the CLI
/// dispatch on them.
enum class ErrorCode {
  InvalidArgument,
  Io,
  // manifest
  MalformedLine,
  DuplicateSampleId,
  SchemaViolation,
  UnknownCategory,
  // demoset
  EmptyCategory,
  // prompt
  TemplateMismatch,
  MissingImage,
  // inference
  BackendUnreachable,
  AuthMissing,
  ProtocolError,
  UnknownSample,
  // scoring
  EmptyVoteList,
  DemoLeak,
  MalformedScoreRow,
  // metrics
  NoAttacks,
  NoBonaFide,
  DegenerateCurve,
  InvalidTarget,
  MissingDevSet,
  // protocol
  InsufficientDatasets,
  EmptyCategorySpace,
  EmptyGroup,
  // report
  EmptyCurve,
  InsufficientPoints,
  NoResults,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading code name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// A class label within a task: a PAI species, a morphing tool, or bona fide.
/// Names are stored trimmed and lowercased.
struct CategoryId {
  Task task = Task::PAD;
  std::string name;

  CategoryId() = default;
  CategoryId(Task t, std::string_view n);

  bool is_bona_fide() const { return name == kBonaFide; }

  friend bool operator==(const CategoryId&, const CategoryId&) = default;
  friend std::strong_ordering operator<=>(const CategoryId&, const CategoryId&) = default;
};

std::string_view to_string(Task t);
std::string_view to_string(Split s);
/// "bona_fide" / "attack", the manifest and CSV spelling.
std::string_view to_string(Label l);

std::optional<Task> parse_task(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
std::optional<Label> parse_label(std::string_view s);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace icleval
