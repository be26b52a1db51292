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

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "icleval/common.hpp"

namespace icleval {

struct ImageMedia {
  std::string path;
  friend bool operator==(const ImageMedia&, const ImageMedia&) = default;
};

/// Pre-extracted, temporally ordered frames of one video.
struct VideoFrames {
  std::vector<std::string> paths;
  friend bool operator==(const VideoFrames&, const VideoFrames&) = default;
};

using Media = std::variant<ImageMedia, VideoFrames>;

struct SampleRecord {
  std::string sample_id;
  std::string dataset;
  Split split = Split::Test;
  Media media;
  Label label = Label::BonaFide;
  CategoryId category;
  std::optional<std::string> subject_id;
  bool cropped = true;

  bool is_video() const { return std::holds_alternative<VideoFrames>(media); }
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;
  /// Validates uniqueness and dataset-name consistency; throws on violation.
  DatasetManifest(std::string name, Task task, std::vector<SampleRecord> records);

  const std::string& name() const { return name_; }
  Task task() const { return task_; }
  const std::vector<SampleRecord>& records() const { return records_; }
  const std::set<CategoryId>& categories() const { return categories_; }
  std::size_t count(Split split, Label label) const;
  bool has_category(const CategoryId& c) const { return categories_.count(c) != 0; }
  const SampleRecord* find(const std::string& sample_id) const;

 private:
  std::string name_;
  Task task_ = Task::PAD;
  std::vector<SampleRecord> records_;
  std::set<CategoryId> categories_;
  std::map<std::string, std::size_t> index_;
};

/// One problem found while reading a manifest. Line numbers are 1-based.
struct ManifestDiagnostic {
  ErrorCode code;
  std::size_t line_no;
  std::string field;  // offending key for SchemaViolation, the id for DuplicateSampleId
  std::string message;
};

/// Reads JSON-Lines. The manifest format carries no task, so the caller
/// supplies the task the category names belong to. Throws Error on the first
/// violation (MalformedLine, DuplicateSampleId, SchemaViolation).
DatasetManifest parse_manifest(std::istream& in, Task task);
DatasetManifest parse_manifest(const std::string& text, Task task);

/// Same checks as parse_manifest but keeps going and reports every problem.
std::vector<ManifestDiagnostic> validate_manifest(std::istream& in, Task task);

/// One JSON object per line, keys in schema order. Inverse of parse_manifest.
std::string serialize_manifest(const DatasetManifest& manifest);

struct FrameSelection {
  std::vector<std::size_t> indices;
  bool shortfall = false;  // fewer frames than requested; all frames returned
};

/// Evenly spaced frame indices floor(j*(total-1)/(p-1)), j = 0..p-1.
/// Returns every frame and raises the shortfall flag when total < p.
FrameSelection sample_frame_indices(std::size_t total_frames, std::size_t p);

/// Records matching the split (all splits when nullopt), one of the
/// categories, and the crop flag (any when nullopt), in manifest order.
std::vector<SampleRecord> filter_records(const DatasetManifest& manifest,
                                         std::optional<Split> split,
                                         const std::set<CategoryId>& categories,
                                         std::optional<bool> cropped = std::nullopt);

}  // namespace icleval
