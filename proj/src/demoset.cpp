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

#include "icleval/demoset.hpp"

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icleval/util.hpp"

namespace icleval {

namespace {

using nlohmann::ordered_json;

// Uniform integer in [0, bound) by rejection. mt19937_64 output is fixed by
// the standard; std::uniform_int_distribution is not, so it is avoided.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// Bona fide first, then attack categories by name.
bool prompt_order(const CategoryId& a, const CategoryId& b) {
  if (a.is_bona_fide() != b.is_bona_fide()) return a.is_bona_fide();
  return a.name < b.name;
}

}  // namespace

std::string reference_answer(const CategoryId& category, Task task) {
  const bool bona_fide = category.is_bona_fide();
  if (task == Task::PAD) return bona_fide ? "Yes" : "No";
  return bona_fide ? "No" : "Yes";
}

bool DemonstrationSet::contains(const std::string& sample_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const DemonstrationEntry& e) { return e.sample_id == sample_id; });
}

std::set<std::string> DemonstrationSet::attack_categories() const {
  std::set<std::string> out;
  for (const auto& e : entries) {
    if (!e.category.is_bona_fide()) out.insert(e.category.name);
  }
  return out;
}

std::string demonstration_image(const SampleRecord& record) {
  if (const auto* img = std::get_if<ImageMedia>(&record.media)) return img->path;
  const auto& frames = std::get<VideoFrames>(record.media).paths;
  return frames[frames.size() / 2];
}

DemonstrationSet build_demoset(const DatasetManifest& manifest, const DemosetRequest& request) {
  if (request.n_shots < 0 || request.n_shots > request.shot_cap) {
    throw Error(ErrorCode::InvalidArgument,
                "n_shots " + std::to_string(request.n_shots) + " outside [0, " +
                    std::to_string(request.shot_cap) + "]");
  }
  for (const auto& c : request.categories) {
    if (!manifest.has_category(c)) {
      throw Error(ErrorCode::UnknownCategory,
                  "'" + c.name + "' not present in manifest '" + manifest.name() + "'");
    }
  }

  DemonstrationSet ds;
  ds.task = manifest.task();
  ds.instruction = request.instruction;
  ds.n_shots = request.n_shots;
  ds.seed = request.seed;
  ds.source_dataset = manifest.name();
  ds.source_split = request.split;
  if (request.n_shots == 0) return ds;

  const bool has_bona_fide =
      std::any_of(request.categories.begin(), request.categories.end(),
                  [](const CategoryId& c) { return c.is_bona_fide(); });
  if (!has_bona_fide) {
    throw Error(ErrorCode::InvalidArgument, "demonstration categories must include bona_fide");
  }

  std::vector<CategoryId> ordered(request.categories.begin(), request.categories.end());
  std::sort(ordered.begin(), ordered.end(), prompt_order);

  for (const auto& category : ordered) {
    auto pool = filter_records(manifest, request.split, {category}, request.cropped);
    if (pool.empty()) {
      throw Error(ErrorCode::EmptyCategory,
                  "'" + category.name + "' has no samples in the requested split of '" +
                      manifest.name() + "'");
    }
    const auto want = static_cast<std::size_t>(request.n_shots);
    const std::size_t take = std::min(want, pool.size());
    if (take < want) {
      ds.shortfalls[category.name] = pool.size();
      spdlog::warn("demoset: category '{}' has {} samples, fewer than {} shots", category.name,
                   pool.size(), want);
    }
    // Each category gets its own stream so adding a category does not
    // perturb the draws of the others.
    std::mt19937_64 rng(hash_combine(request.seed, fnv1a64(category.name)));
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + bounded(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
      ds.entries.push_back(DemonstrationEntry{pool[i].sample_id, demonstration_image(pool[i]),
                                              category, reference_answer(category, ds.task)});
    }
  }
  return ds;
}

std::string serialize_demoset(const DemonstrationSet& ds) {
  ordered_json j;
  j["task"] = to_string(ds.task);
  j["instruction"] = ds.instruction;
  j["n_shots"] = ds.n_shots;
  j["seed"] = ds.seed;
  j["source_dataset"] = ds.source_dataset;
  j["source_split"] = ds.source_split ? ordered_json(to_string(*ds.source_split)) : ordered_json(nullptr);
  j["entries"] = ordered_json::array();
  for (const auto& e : ds.entries) {
    j["entries"].push_back(ordered_json{{"sample_id", e.sample_id},
                                        {"path", e.path},
                                        {"category", e.category.name},
                                        {"reference_answer", e.reference_answer}});
  }
  j["shortfalls"] = ordered_json::object();
  for (const auto& [name, available] : ds.shortfalls) j["shortfalls"][name] = available;
  return j.dump(2) + "\n";
}

DemonstrationSet parse_demoset(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DemonstrationSet ds;
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw Error(ErrorCode::SchemaViolation, "demoset task must be pad|smad");
    ds.task = *task;
    ds.instruction = j.at("instruction").get<std::string>();
    ds.n_shots = j.at("n_shots").get<int>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.source_dataset = j.at("source_dataset").get<std::string>();
    if (j.contains("source_split") && !j["source_split"].is_null()) {
      ds.source_split = parse_split(j["source_split"].get<std::string>());
      if (!ds.source_split) throw Error(ErrorCode::SchemaViolation, "bad demoset source_split");
    }
    for (const auto& e : j.at("entries")) {
      ds.entries.push_back(DemonstrationEntry{e.at("sample_id").get<std::string>(),
                                              e.at("path").get<std::string>(),
                                              CategoryId(ds.task, e.at("category").get<std::string>()),
                                              e.at("reference_answer").get<std::string>()});
    }
    if (j.contains("shortfalls")) {
      for (const auto& [k, v] : j["shortfalls"].items()) ds.shortfalls[k] = v.get<std::size_t>();
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("demoset JSON: ") + e.what());
  }
}

std::string demoset_fingerprint(const DemonstrationSet& demoset) {
  return sha256_hex(serialize_demoset(demoset));
}

}  // namespace icleval
