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
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icleval/common.hpp"
#include "icleval/manifest.hpp"
#include "icleval/prompt.hpp"

namespace icleval {

enum class Vote { BonaFide, Attack, Unparseable };

std::string_view to_string(Vote v);

struct BinaryVote {
  Vote value = Vote::Unparseable;
  std::string raw_text;
  std::chrono::milliseconds latency{0};
};

/// Cue phrases for the fallback scan when the opening tokens carry no
/// unambiguous yes/no. Versioned: changing them changes parse results.
struct KeywordCues {
  std::vector<std::string> bona_fide;
  std::vector<std::string> attack;
};
inline constexpr int kKeywordCuesVersion = 1;
const KeywordCues& keyword_cues(Task task);

/// Maps free text to a vote. Looks for exactly one of yes/no among the first
/// eight normalized tokens and applies the task polarity (PAD: yes means bona
/// fide; SMAD: yes means attack). Otherwise scans the whole text for cue
/// phrases; a cue overlapping an earlier-starting cue of the other side is
/// ignored ("not a morphed image" is not also a morph cue). Anything still
/// ambiguous is Unparseable. Total and deterministic.
BinaryVote parse_answer(std::string_view raw_text, Task task);

/// The vote implied by a ground-truth label.
Vote vote_for(Label label);

struct BackendConfig {
  std::string endpoint_url;
  std::string model_id;
  std::optional<std::string> auth_env_var;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  int max_concurrent = 4;
  double temperature = 0.0;
  int max_tokens = 64;

  void validate() const;
};

BackendConfig parse_backend_config(const std::string& json_text);
std::string serialize_backend_config(const BackendConfig& c);

/// The model behind a prompt. complete() is safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;

  std::string complete(const PromptObject& prompt, int query_index) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return generate(prompt, query_index);
  }
  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
  virtual std::string model_id() const = 0;

 protected:
  virtual std::string generate(const PromptObject& prompt, int query_index) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// One query through the backend, timed and parsed.
BinaryVote classify(const PromptObject& prompt, Backend& backend, int query_index = 0);

/// Wraps a callable; handy for scripted responses in tests and examples.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<std::string(const PromptObject&, int)>;
  FunctionBackend(Fn fn, std::string model = "scripted") : fn_(std::move(fn)), model_(std::move(model)) {}
  std::string model_id() const override { return model_; }

 protected:
  std::string generate(const PromptObject& p, int q) override { return fn_(p, q); }

 private:
  Fn fn_;
  std::string model_;
};

/// Fluent answer a well-behaved model would give for this vote.
std::string mock_sentence(Vote vote, Task task);

/// Whether the mock flips the answer for this query. Keyed only on
/// (seed, sample_id, query_index), so order and concurrency do not matter.
bool mock_flips(std::uint64_t seed, std::string_view sample_id, int query_index, double rate);

/// Simulated detector with configurable error rates. Attacks are answered as
/// bona fide with probability apcer_sim, bona fide samples as attacks with
/// probability bpcer_sim.
class MockBackend : public Backend {
 public:
  MockBackend(std::map<std::string, Label> ground_truth, double apcer_sim, double bpcer_sim,
              std::uint64_t seed);
  static std::map<std::string, Label> ground_truth_from(const std::vector<DatasetManifest>& manifests);

  std::string model_id() const override { return "mock"; }

 protected:
  std::string generate(const PromptObject& prompt, int query_index) override;

 private:
  std::map<std::string, Label> truth_;
  double apcer_sim_;
  double bpcer_sim_;
  std::uint64_t seed_;
};

/// Bounds the number of requests in flight.
class AdmissionLimit {
 public:
  explicit AdmissionLimit(int slots) : slots_(slots) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

/// Request body for POST {endpoint}/v1/classify. Deterministic bytes.
std::string build_wire_request(const PromptObject& prompt, const BackendConfig& config,
                               const std::filesystem::path& data_root);

/// Returns a description of the first violation, or nullopt when the JSON is
/// a conforming classify request.
std::optional<std::string> check_wire_request(const nlohmann::json& request);

/// Client for the harness wire protocol. Transport failures, 429 and 5xx are
/// retried with exponential backoff; the same payload bytes are resent.
class HttpBackend : public Backend {
 public:
  HttpBackend(BackendConfig config, std::filesystem::path data_root);
  std::string model_id() const override { return config_.model_id; }
  const BackendConfig& config() const { return config_; }

 protected:
  std::string generate(const PromptObject& prompt, int query_index) override;

 private:
  BackendConfig config_;
  std::filesystem::path data_root_;
  std::string scheme_host_port_;
  std::string path_;
  AdmissionLimit admission_;
};

/// In-process HTTP server speaking the wire protocol, for self-tests and the
/// serve-mock command. The handler receives a validated request and returns
/// the answer text; Error(UnknownSample) becomes HTTP 400.
class MockServer {
 public:
  using Handler = std::function<std::string(const nlohmann::json& request)>;
  MockServer(Handler handler, std::string model);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);
  void stop();
  std::uint64_t requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Handler answering from ground truth keyed by the SHA-256 of each sample's
/// query image bytes (every frame of a video maps to its sample).
MockServer::Handler image_hash_handler(const std::vector<DatasetManifest>& manifests,
                                       const std::filesystem::path& data_root, double apcer_sim,
                                       double bpcer_sim, std::uint64_t seed);

}  // namespace icleval
