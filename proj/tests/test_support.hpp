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

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icleval/manifest.hpp"
#include "icleval/util.hpp"

namespace icleval::testing {

inline std::filesystem::path test_dir() { return ICLEVAL_TEST_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "icleval") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline SampleRecord image_record(const std::string& id, const std::string& dataset, Split split, Task task,
                                 const std::string& category, bool cropped = true) {
  SampleRecord r;
  r.sample_id = id;
  r.dataset = dataset;
  r.split = split;
  r.category = CategoryId(task, category);
  r.label = r.category.is_bona_fide() ? Label::BonaFide : Label::Attack;
  r.media = ImageMedia{"img/" + id + ".png"};
  r.cropped = cropped;
  return r;
}

inline SampleRecord video_record(const std::string& id, const std::string& dataset, Split split,
                                 const std::string& category, int frames = 10) {
  SampleRecord r = image_record(id, dataset, split, Task::PAD, category);
  VideoFrames v;
  for (int f = 0; f < frames; ++f) v.paths.push_back("vid/" + id + "/" + std::to_string(f) + ".png");
  r.media = v;
  return r;
}

// Same shape as the CASIA-FASD split sizes: 60 BP / 180 attack videos in
// train, 90 / 270 in test, three attack species in equal shares.
inline DatasetManifest casia_like(const std::string& name = "casia") {
  const std::vector<std::string> species{"cut_attack", "video_attack", "warped_attack"};
  std::vector<SampleRecord> records;
  auto add = [&](Split split, int bp, int per_species) {
    const std::string s(to_string(split));
    for (int i = 0; i < bp; ++i) {
      records.push_back(video_record(name + "_" + s + "_bf_" + std::to_string(i), name, split, "bona_fide"));
    }
    for (const auto& sp : species) {
      for (int i = 0; i < per_species; ++i) {
        records.push_back(video_record(name + "_" + s + "_" + sp + "_" + std::to_string(i), name, split, sp));
      }
    }
  };
  add(Split::Train, 60, 60);
  add(Split::Test, 90, 90);
  return DatasetManifest(name, Task::PAD, records);
}

// Small image-only manifest with arbitrary category sizes per split.
inline DatasetManifest small_manifest(const std::string& name, Task task,
                                      const std::map<std::string, std::pair<int, int>>& train_test) {
  std::vector<SampleRecord> records;
  for (const auto& [cat, counts] : train_test) {
    for (int i = 0; i < counts.first; ++i) {
      records.push_back(image_record(name + "_tr_" + cat + "_" + std::to_string(i), name, Split::Train, task, cat));
    }
    for (int i = 0; i < counts.second; ++i) {
      records.push_back(image_record(name + "_te_" + cat + "_" + std::to_string(i), name, Split::Test, task, cat));
    }
  }
  return DatasetManifest(name, task, records);
}

// Byte-for-byte snapshot of every regular file under root, keyed by
// relative path.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

// Compares against tests/golden/<name>. With UPDATE_GOLDENS=1 in the
// environment the file is rewritten instead and the check passes.
inline bool matches_golden(const std::string& name, const std::string& actual, std::string* expected_out = nullptr) {
  const auto path = test_dir() / "golden" / name;
  if (const char* u = std::getenv("UPDATE_GOLDENS"); u && std::string(u) == "1") {
    write_file_atomic(path, actual);
    return true;
  }
  if (!std::filesystem::exists(path)) return false;
  const auto expected = read_file(path);
  if (expected_out) *expected_out = expected;
  return expected == actual;
}

}  // namespace icleval::testing
