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

#include "icleval/manifest.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace icleval {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kKeys[] = {"sample_id", "dataset", "split",   "label",
                                 "category",  "subject_id", "cropped", "media"};

struct LineResult {
  std::optional<SampleRecord> record;
  std::optional<ManifestDiagnostic> diagnostic;
};

LineResult violation(std::size_t line_no, std::string field, std::string message) {
  return {std::nullopt, ManifestDiagnostic{ErrorCode::SchemaViolation, line_no, std::move(field),
                                           std::move(message)}};
}

std::optional<std::string> nonempty_string(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  auto s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

LineResult parse_line(std::string_view text, std::size_t line_no, Task task) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    return {std::nullopt, ManifestDiagnostic{ErrorCode::MalformedLine, line_no, "", e.what()}};
  }
  if (!obj.is_object()) {
    return {std::nullopt,
            ManifestDiagnostic{ErrorCode::MalformedLine, line_no, "", "line is not a JSON object"}};
  }
  for (const auto& [key, _] : obj.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      return violation(line_no, key, "unknown key");
    }
  }

  SampleRecord rec;
  auto id = nonempty_string(obj, "sample_id");
  if (!id) return violation(line_no, "sample_id", "must be a non-empty string");
  rec.sample_id = *id;

  auto dataset = nonempty_string(obj, "dataset");
  if (!dataset) return violation(line_no, "dataset", "must be a non-empty string");
  rec.dataset = *dataset;

  auto split_s = nonempty_string(obj, "split");
  auto split = split_s ? parse_split(*split_s) : std::nullopt;
  if (!split) return violation(line_no, "split", "must be one of train|dev|test");
  rec.split = *split;

  auto label_s = nonempty_string(obj, "label");
  auto label = label_s ? parse_label(*label_s) : std::nullopt;
  if (!label) return violation(line_no, "label", "must be bona_fide|attack");
  rec.label = *label;

  auto category = nonempty_string(obj, "category");
  if (!category || trim(*category).empty()) {
    return violation(line_no, "category", "must be a non-empty string");
  }
  rec.category = CategoryId(task, *category);
  if ((rec.label == Label::BonaFide) != rec.category.is_bona_fide()) {
    return violation(line_no, "category",
                     fmt::format("label '{}' inconsistent with category '{}'",
                                 to_string(rec.label), rec.category.name));
  }

  if (auto it = obj.find("subject_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) return violation(line_no, "subject_id", "must be a string or null");
    rec.subject_id = it->get<std::string>();
  }

  auto cropped = obj.find("cropped");
  if (cropped == obj.end() || !cropped->is_boolean()) {
    return violation(line_no, "cropped", "must be a boolean");
  }
  rec.cropped = cropped->get<bool>();

  auto media = obj.find("media");
  if (media == obj.end() || !media->is_object()) return violation(line_no, "media", "must be an object");
  auto type = nonempty_string(*media, "type");
  if (type == "image") {
    auto path = nonempty_string(*media, "path");
    if (!path) return violation(line_no, "media.path", "must be a non-empty string");
    rec.media = ImageMedia{*path};
  } else if (type == "video_frames") {
    auto paths = media->find("paths");
    if (paths == media->end() || !paths->is_array() || paths->empty()) {
      return violation(line_no, "media.paths", "must be a non-empty array");
    }
    VideoFrames frames;
    for (const auto& p : *paths) {
      if (!p.is_string() || p.get<std::string>().empty()) {
        return violation(line_no, "media.paths", "frame paths must be non-empty strings");
      }
      frames.paths.push_back(p.get<std::string>());
    }
    rec.media = std::move(frames);
  } else {
    return violation(line_no, "media.type", "must be image|video_frames");
  }
  return {std::move(rec), std::nullopt};
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

// Runs every line through parse_line plus the cross-record checks.
// Stops at the first problem when fail_fast is set.
std::vector<ManifestDiagnostic> scan(std::istream& in, Task task, bool fail_fast,
                                     std::vector<SampleRecord>& records) {
  std::vector<ManifestDiagnostic> problems;
  std::set<std::string> seen;
  std::string name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto res = parse_line(line, line_no, task);
    if (res.record) {
      auto& rec = *res.record;
      if (name.empty()) name = rec.dataset;
      if (rec.dataset != name) {
        res.diagnostic = ManifestDiagnostic{
            ErrorCode::SchemaViolation, line_no, "dataset",
            fmt::format("dataset '{}' differs from manifest dataset '{}'", rec.dataset, name)};
      } else if (!seen.insert(rec.sample_id).second) {
        res.diagnostic = ManifestDiagnostic{ErrorCode::DuplicateSampleId, line_no, rec.sample_id,
                                            "duplicate sample_id '" + rec.sample_id + "'"};
      } else {
        records.push_back(std::move(rec));
      }
    }
    if (res.diagnostic) {
      problems.push_back(std::move(*res.diagnostic));
      if (fail_fast) break;
    }
  }
  return problems;
}

}  // namespace

DatasetManifest::DatasetManifest(std::string name, Task task, std::vector<SampleRecord> records)
    : name_(std::move(name)), task_(task), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.dataset != name_) {
      throw Error(ErrorCode::SchemaViolation, "record '" + r.sample_id + "' has dataset '" +
                                                  r.dataset + "', expected '" + name_ + "'");
    }
    if (!index_.emplace(r.sample_id, i).second) {
      throw Error(ErrorCode::DuplicateSampleId, r.sample_id);
    }
    categories_.insert(r.category);
  }
}

std::size_t DatasetManifest::count(Split split, Label label) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += (r.split == split && r.label == label) ? 1 : 0;
  return n;
}

const SampleRecord* DatasetManifest::find(const std::string& sample_id) const {
  auto it = index_.find(sample_id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

DatasetManifest parse_manifest(std::istream& in, Task task) {
  std::vector<SampleRecord> records;
  auto problems = scan(in, task, /*fail_fast=*/true, records);
  if (!problems.empty()) {
    const auto& p = problems.front();
    std::string what = fmt::format("line {}: {}", p.line_no, p.message);
    if (p.code == ErrorCode::SchemaViolation) what = fmt::format("field '{}' {}", p.field, what);
    throw Error(p.code, what);
  }
  std::string name = records.empty() ? std::string() : records.front().dataset;
  return DatasetManifest(std::move(name), task, std::move(records));
}

DatasetManifest parse_manifest(const std::string& text, Task task) {
  std::istringstream in(text);
  return parse_manifest(in, task);
}

std::vector<ManifestDiagnostic> validate_manifest(std::istream& in, Task task) {
  std::vector<SampleRecord> records;
  return scan(in, task, /*fail_fast=*/false, records);
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records()) {
    ordered_json j;
    j["sample_id"] = r.sample_id;
    j["dataset"] = r.dataset;
    j["split"] = to_string(r.split);
    j["label"] = to_string(r.label);
    j["category"] = r.category.name;
    j["subject_id"] = r.subject_id ? ordered_json(*r.subject_id) : ordered_json(nullptr);
    j["cropped"] = r.cropped;
    if (const auto* img = std::get_if<ImageMedia>(&r.media)) {
      j["media"] = ordered_json{{"type", "image"}, {"path", img->path}};
    } else {
      const auto& v = std::get<VideoFrames>(r.media);
      j["media"] = ordered_json{{"type", "video_frames"}, {"paths", v.paths}};
    }
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

FrameSelection sample_frame_indices(std::size_t total_frames, std::size_t p) {
  if (total_frames == 0 || p == 0) {
    throw Error(ErrorCode::InvalidArgument, "total_frames and p must be positive");
  }
  FrameSelection sel;
  if (total_frames < p) {
    sel.shortfall = true;
    for (std::size_t i = 0; i < total_frames; ++i) sel.indices.push_back(i);
    return sel;
  }
  if (p == 1) {
    sel.indices.push_back(0);
    return sel;
  }
  for (std::size_t j = 0; j < p; ++j) sel.indices.push_back(j * (total_frames - 1) / (p - 1));
  return sel;
}

std::vector<SampleRecord> filter_records(const DatasetManifest& manifest,
                                         std::optional<Split> split,
                                         const std::set<CategoryId>& categories,
                                         std::optional<bool> cropped) {
  for (const auto& c : categories) {
    if (!manifest.has_category(c)) {
      throw Error(ErrorCode::UnknownCategory,
                  "'" + c.name + "' not present in manifest '" + manifest.name() + "'");
    }
  }
  std::vector<SampleRecord> out;
  for (const auto& r : manifest.records()) {
    if (split && r.split != *split) continue;
    if (!categories.count(r.category)) continue;
    if (cropped && r.cropped != *cropped) continue;
    out.push_back(r);
  }
  return out;
}

}  // namespace icleval
