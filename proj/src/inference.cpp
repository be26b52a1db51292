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

#include "icleval/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icleval/util.hpp"

namespace icleval {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Lowercase, punctuation to spaces, single-space separated.
std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

std::vector<Span> find_cues(const std::string& padded, const std::vector<std::string>& cues) {
  std::vector<Span> spans;
  for (const auto& cue : cues) {
    const std::string needle = " " + join(normalize_tokens(cue), " ") + " ";
    for (auto pos = padded.find(needle); pos != std::string::npos; pos = padded.find(needle, pos + 1)) {
      spans.push_back({pos + 1, pos + needle.size() - 1});
    }
  }
  return spans;
}

// Drops spans that overlap a span of the other side starting strictly earlier.
std::size_t surviving(const std::vector<Span>& mine, const std::vector<Span>& theirs) {
  return static_cast<std::size_t>(std::count_if(mine.begin(), mine.end(), [&](const Span& s) {
    return std::none_of(theirs.begin(), theirs.end(), [&](const Span& t) {
      return t.begin < s.begin && t.end > s.begin;
    });
  }));
}

Vote polarity(bool said_yes, Task task) {
  if (task == Task::PAD) return said_yes ? Vote::BonaFide : Vote::Attack;
  return said_yes ? Vote::Attack : Vote::BonaFide;
}

struct Endpoint {
  std::string scheme_host_port;
  std::string base_path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "endpoint_url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.scheme_host_port = url.substr(0, path_start);
  ep.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

class AdmissionGuard {
 public:
  explicit AdmissionGuard(AdmissionLimit& limit) : limit_(limit) { limit_.acquire(); }
  ~AdmissionGuard() { limit_.release(); }
  AdmissionGuard(const AdmissionGuard&) = delete;
  AdmissionGuard& operator=(const AdmissionGuard&) = delete;

 private:
  AdmissionLimit& limit_;
};

}  // namespace

std::string_view to_string(Vote v) {
  switch (v) {
    case Vote::BonaFide: return "bona_fide";
    case Vote::Attack: return "attack";
    case Vote::Unparseable: return "unparseable";
  }
  return "unparseable";
}

const KeywordCues& keyword_cues(Task task) {
  static const KeywordCues pad{{"bona fide", "genuine", "live", "real face"},
                               {"presentation attack", "spoof", "printed", "replay", "mask"}};
  static const KeywordCues smad{{"not a morphed", "genuine", "photograph of a person"},
                                {"morphed image", "morphing", "blended"}};
  return task == Task::PAD ? pad : smad;
}

BinaryVote parse_answer(std::string_view raw_text, Task task) {
  BinaryVote vote;
  vote.raw_text = std::string(raw_text);
  const auto tokens = normalize_tokens(raw_text);

  bool yes = false;
  bool no = false;
  for (std::size_t i = 0; i < tokens.size() && i < 8; ++i) {
    yes = yes || tokens[i] == "yes";
    no = no || tokens[i] == "no";
  }
  if (yes != no) {
    vote.value = polarity(yes, task);
    return vote;
  }

  const std::string padded = " " + join(tokens, " ") + " ";
  const auto& cues = keyword_cues(task);
  const auto bf_spans = find_cues(padded, cues.bona_fide);
  const auto at_spans = find_cues(padded, cues.attack);
  const bool bf = surviving(bf_spans, at_spans) > 0;
  const bool at = surviving(at_spans, bf_spans) > 0;
  if (bf != at) vote.value = bf ? Vote::BonaFide : Vote::Attack;
  return vote;
}

Vote vote_for(Label label) { return label == Label::BonaFide ? Vote::BonaFide : Vote::Attack; }

void BackendConfig::validate() const {
  if (max_concurrent < 1) throw Error(ErrorCode::InvalidArgument, "max_concurrent must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
  if (max_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_tokens must be >= 1");
  if (backoff_base.count() < 0) throw Error(ErrorCode::InvalidArgument, "backoff_base must be >= 0");
}

BackendConfig parse_backend_config(const std::string& json_text) {
  BackendConfig c;
  try {
    const auto j = json::parse(json_text);
    c.endpoint_url = j.at("endpoint_url").get<std::string>();
    c.model_id = j.at("model_id").get<std::string>();
    if (j.contains("auth_env_var") && !j["auth_env_var"].is_null()) {
      c.auth_env_var = j["auth_env_var"].get<std::string>();
    }
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", c.backoff_base.count()));
    c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_backend_config(const BackendConfig& c) {
  ordered_json j;
  j["endpoint_url"] = c.endpoint_url;
  j["model_id"] = c.model_id;
  j["auth_env_var"] = c.auth_env_var ? ordered_json(*c.auth_env_var) : ordered_json(nullptr);
  j["timeout_ms"] = c.timeout.count();
  j["max_retries"] = c.max_retries;
  j["backoff_base_ms"] = c.backoff_base.count();
  j["max_concurrent"] = c.max_concurrent;
  j["temperature"] = c.temperature;
  j["max_tokens"] = c.max_tokens;
  return j.dump(2) + "\n";
}

BinaryVote classify(const PromptObject& prompt, Backend& backend, int query_index) {
  const auto t0 = std::chrono::steady_clock::now();
  auto text = backend.complete(prompt, query_index);
  auto vote = parse_answer(text, prompt.task);
  vote.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - t0);
  return vote;
}

std::string mock_sentence(Vote vote, Task task) {
  if (task == Task::PAD) {
    return vote == Vote::BonaFide ? "Yes, this is a bona fide presentation of a live face."
                                  : "No, this looks like a presentation attack.";
  }
  return vote == Vote::Attack ? "Yes, this is a morphed image." : "No, this is not a morphed image.";
}

bool mock_flips(std::uint64_t seed, std::string_view sample_id, int query_index, double rate) {
  const auto key = hash_combine(hash_combine(seed, fnv1a64(sample_id)),
                                static_cast<std::uint64_t>(query_index));
  return unit_interval(key) < rate;
}

MockBackend::MockBackend(std::map<std::string, Label> ground_truth, double apcer_sim,
                         double bpcer_sim, std::uint64_t seed)
    : truth_(std::move(ground_truth)), apcer_sim_(apcer_sim), bpcer_sim_(bpcer_sim), seed_(seed) {
  const auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(apcer_sim) || !in_unit(bpcer_sim)) {
    throw Error(ErrorCode::InvalidArgument, "mock error rates must lie in [0, 1]");
  }
}

std::map<std::string, Label> MockBackend::ground_truth_from(
    const std::vector<DatasetManifest>& manifests) {
  std::map<std::string, Label> truth;
  for (const auto& m : manifests) {
    for (const auto& r : m.records()) truth[r.sample_id] = r.label;
  }
  return truth;
}

std::string MockBackend::generate(const PromptObject& prompt, int query_index) {
  const auto it = truth_.find(prompt.query_sample_id);
  if (it == truth_.end()) throw Error(ErrorCode::UnknownSample, prompt.query_sample_id);
  const double rate = it->second == Label::Attack ? apcer_sim_ : bpcer_sim_;
  Vote v = vote_for(it->second);
  if (mock_flips(seed_, prompt.query_sample_id, query_index, rate)) {
    v = v == Vote::BonaFide ? Vote::Attack : Vote::BonaFide;
  }
  return mock_sentence(v, prompt.task);
}

void AdmissionLimit::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return slots_ > 0; });
  --slots_;
}

void AdmissionLimit::release() {
  {
    std::lock_guard lock(mu_);
    ++slots_;
  }
  cv_.notify_one();
}

std::string build_wire_request(const PromptObject& prompt, const BackendConfig& config,
                               const std::filesystem::path& data_root) {
  ordered_json j;
  j["model"] = config.model_id;
  j["temperature"] = config.temperature;
  j["max_tokens"] = config.max_tokens;
  j["messages"] = wire_messages(prompt, data_root);
  return j.dump();
}

std::optional<std::string> check_wire_request(const json& req) {
  if (!req.is_object()) return "request must be a JSON object";
  if (!req.contains("model") || !req["model"].is_string()) return "model must be a string";
  if (!req.contains("temperature") || !req["temperature"].is_number()) {
    return "temperature must be a number";
  }
  if (!req.contains("max_tokens") || !req["max_tokens"].is_number_integer()) {
    return "max_tokens must be an integer";
  }
  if (!req.contains("messages") || !req["messages"].is_array() || req["messages"].empty()) {
    return "messages must be a non-empty array";
  }
  for (const auto& m : req["messages"]) {
    if (!m.is_object()) return "message must be an object";
    const auto role = m.value("role", std::string());
    if (role != "user" && role != "assistant") return "role must be user|assistant";
    if (!m.contains("parts") || !m["parts"].is_array()) return "parts must be an array";
    for (const auto& p : m["parts"]) {
      if (!p.is_object()) return "part must be an object";
      const auto type = p.value("type", std::string());
      if (type == "text") {
        if (!p.contains("text") || !p["text"].is_string()) return "text part needs a string text";
      } else if (type == "image") {
        if (p.value("encoding", std::string()) != "base64-png") return "image encoding must be base64-png";
        if (!p.contains("data") || !p["data"].is_string()) return "image part needs string data";
      } else {
        return "part type must be text|image";
      }
    }
  }
  return std::nullopt;
}

HttpBackend::HttpBackend(BackendConfig config, std::filesystem::path data_root)
    : config_(std::move(config)), data_root_(std::move(data_root)),
      admission_(config_.max_concurrent) {
  config_.validate();
  auto ep = split_url(config_.endpoint_url);
  scheme_host_port_ = std::move(ep.scheme_host_port);
  path_ = ep.base_path + "/v1/classify";
}

std::string HttpBackend::generate(const PromptObject& prompt, int /*query_index*/) {
  httplib::Headers headers;
  if (config_.auth_env_var) {
    const char* secret = std::getenv(config_.auth_env_var->c_str());
    if (secret == nullptr) {
      throw Error(ErrorCode::AuthMissing, "environment variable " + *config_.auth_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + secret);
  }
  const std::string payload = build_wire_request(prompt, config_, data_root_);

  AdmissionGuard guard(admission_);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto shift = std::min(attempt - 1, 10);
      std::this_thread::sleep_for(config_.backoff_base * (1 << shift));
      spdlog::debug("classify {}: retry {} after {}", prompt.query_sample_id, attempt, last_error);
    }
    httplib::Client client(scheme_host_port_);
    const auto secs = [](std::chrono::milliseconds ms) {
      return std::chrono::duration_cast<std::chrono::microseconds>(ms);
    };
    client.set_connection_timeout(secs(config_.timeout));
    client.set_read_timeout(secs(config_.timeout));
    client.set_write_timeout(secs(config_.timeout));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ProtocolError,
                  "HTTP " + std::to_string(res->status) + " from " + config_.endpoint_url + ": " + res->body);
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::ProtocolError, "response is not JSON");
    }
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      throw Error(ErrorCode::ProtocolError, "response lacks a string 'text'");
    }
    return body["text"].get<std::string>();
  }
  throw Error(ErrorCode::BackendUnreachable,
              config_.endpoint_url + " after " + std::to_string(config_.max_retries + 1) +
                  " attempts (" + last_error + ")");
}

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  std::atomic<std::uint64_t> requests{0};
};

MockServer::MockServer(Handler handler, std::string model) : impl_(std::make_unique<Impl>()) {
  auto* impl = impl_.get();
  impl->server.Get("/healthz", [model](const httplib::Request&, httplib::Response& res) {
    res.set_content(ordered_json{{"model", model}, {"ready", true}}.dump(), "application/json");
  });
  impl->server.Post("/v1/classify", [impl, model, handler = std::move(handler)](
                                        const httplib::Request& req, httplib::Response& res) {
    impl->requests.fetch_add(1);
    const auto fail = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(ordered_json{{"error", msg}}.dump(), "application/json");
    };
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return fail(400, "request body is not JSON");
    }
    if (auto problem = check_wire_request(body)) return fail(400, *problem);
    try {
      auto text = handler(body);
      res.set_content(ordered_json{{"text", text}, {"model", model}}.dump(), "application/json");
    } catch (const Error& e) {
      fail(e.code() == ErrorCode::UnknownSample ? 400 : 500, e.what());
    }
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MockServer::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void MockServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint64_t MockServer::requests() const { return impl_->requests.load(); }

MockServer::Handler image_hash_handler(const std::vector<DatasetManifest>& manifests,
                                       const std::filesystem::path& data_root, double apcer_sim,
                                       double bpcer_sim, std::uint64_t seed) {
  struct Entry {
    std::string sample_id;
    Label label;
    Task task;
  };
  auto index = std::make_shared<std::map<std::string, Entry>>();
  for (const auto& m : manifests) {
    for (const auto& r : m.records()) {
      std::vector<std::string> paths;
      if (const auto* img = std::get_if<ImageMedia>(&r.media)) paths.push_back(img->path);
      else paths = std::get<VideoFrames>(r.media).paths;
      for (const auto& p : paths) {
        std::string bytes;
        try {
          bytes = read_file(data_root / p);
        } catch (const Error&) {
          continue;  // unreadable images simply cannot be answered
        }
        (*index)[sha256_hex(bytes)] = Entry{r.sample_id, r.label, m.task()};
      }
    }
  }
  return [index, apcer_sim, bpcer_sim, seed](const json& request) {
    // The query image is the last image of the last message.
    const auto& parts = request["messages"].back()["parts"];
    std::string data;
    for (const auto& p : parts) {
      if (p["type"] == "image") data = p["data"].get<std::string>();
    }
    if (data.empty()) throw Error(ErrorCode::UnknownSample, "no query image in final message");
    const auto digest = sha256_hex(base64_decode(data));
    const auto it = index->find(digest);
    if (it == index->end()) throw Error(ErrorCode::UnknownSample, "image " + digest);
    const auto& e = it->second;
    Vote v = vote_for(e.label);
    if (mock_flips(seed, digest, 0, e.label == Label::Attack ? apcer_sim : bpcer_sim)) {
      v = v == Vote::BonaFide ? Vote::Attack : Vote::BonaFide;
    }
    return mock_sentence(v, e.task);
  };
}

}  // namespace icleval
