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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "icleval/common.hpp"
#include "icleval/manifest.hpp"

namespace icleval {

inline constexpr int kDefaultShotCap = 9;

/// "Yes" / "No" for the category under the task's question polarity:
/// PAD asks "is this bona fide?", SMAD asks "is this morphed?".
std::string reference_answer(const CategoryId& category, Task task);

struct DemonstrationEntry {
  std::string sample_id;
  std::string path;
  CategoryId category;
  std::string reference_answer;

  friend bool operator==(const DemonstrationEntry&, const DemonstrationEntry&) = default;
};

/// The instruction plus k labelled examples shown ahead of every query.
struct DemonstrationSet {
  Task task = Task::PAD;
  std::string instruction;
  std::vector<DemonstrationEntry> entries;
  int n_shots = 0;
  std::uint64_t seed = 0;
  std::string source_dataset;
  std::optional<Split> source_split;
  /// Categories that had fewer than n_shots samples, with what was available.
  std::map<std::string, std::size_t> shortfalls;

  bool contains(const std::string& sample_id) const;
  /// Attack categories that contributed at least one entry.
  std::set<std::string> attack_categories() const;

  friend bool operator==(const DemonstrationSet&, const DemonstrationSet&) = default;
};

struct DemosetRequest {
  std::optional<Split> split = Split::Train;  // nullopt draws from every split
  std::set<CategoryId> categories;            // must include bona fide when n_shots > 0
  int n_shots = 0;
  std::uint64_t seed = 0;
  std::string instruction;
  std::optional<bool> cropped;
  int shot_cap = kDefaultShotCap;
};

/// Seeded draw without replacement of n_shots samples per category. Entries
/// are grouped by category, bona fide first and attack categories in name
/// order, each group in draw order. Throws UnknownCategory, EmptyCategory, or
/// InvalidArgument (shot cap exceeded, bona fide missing).
DemonstrationSet build_demoset(const DatasetManifest& manifest, const DemosetRequest& request);

/// Path of the frame used when a video sample serves as a demonstration.
std::string demonstration_image(const SampleRecord& record);

/// Canonical JSON, the persisted form. The fingerprint hashes exactly this.
std::string serialize_demoset(const DemonstrationSet& demoset);
DemonstrationSet parse_demoset(const std::string& text);
std::string demoset_fingerprint(const DemonstrationSet& demoset);

}  // namespace icleval
