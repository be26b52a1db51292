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

#include "icleval/prompt.hpp"

#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "icleval/util.hpp"

namespace icleval {

namespace {

using nlohmann::ordered_json;

constexpr std::string_view kImage = "{image}";
constexpr std::string_view kAnswer = "{answer}";

std::size_t occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::set<std::string> words(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

// Splits the example format into (before image, between image and answer,
// after answer), trimmed.
struct FrameFormat {
  std::string lead;
  std::string cue;
  std::string tail;
};

FrameFormat split_format(const std::string& fmt) {
  const auto img = fmt.find(kImage);
  const auto ans = fmt.find(kAnswer);
  return FrameFormat{trim(std::string_view(fmt).substr(0, img)),
                     trim(std::string_view(fmt).substr(img + kImage.size(), ans - img - kImage.size())),
                     trim(std::string_view(fmt).substr(ans + kAnswer.size()))};
}

void push_text(std::vector<Part>& parts, const std::string& text) {
  if (!text.empty()) parts.emplace_back(TextPart{text});
}

}  // namespace

std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

PromptTemplate PromptTemplate::defaults(Task task) {
  PromptTemplate t;
  t.task = task;
  t.example_frame_format = "{image}Answer: {answer}";
  if (task == Task::PAD) {
    t.instruction_text =
        "You are given face images captured by a face recognition camera. Each example image is "
        "followed by whether it shows a bona fide (genuine, live) face presentation. Use the "
        "examples to answer the question about the final image.";
    t.question_text =
        "Is this image a bona fide (genuine, live) face presentation? Answer only Yes or No.";
  } else {
    t.instruction_text =
        "You are given face images submitted for identity documents. Each example image is "
        "followed by whether it is a morphed face image. Use the examples to answer the question "
        "about the final image.";
    t.question_text = "Is this a morphed face image? Answer only Yes or No.";
  }
  return t;
}

void PromptTemplate::validate() const {
  if (occurrences(example_frame_format, kImage) != 1 ||
      occurrences(example_frame_format, kAnswer) != 1) {
    throw Error(ErrorCode::InvalidArgument,
                "example_frame_format needs exactly one {image} and one {answer}");
  }
  if (example_frame_format.find(kImage) > example_frame_format.find(kAnswer)) {
    throw Error(ErrorCode::InvalidArgument, "{image} must precede {answer}");
  }
  const auto w = words(question_text);
  if (!w.count("yes") || !w.count("no")) {
    throw Error(ErrorCode::InvalidArgument, "question_text must ask for a Yes or No answer");
  }
}

PromptTemplate parse_template(const std::string& json_text) {
  PromptTemplate t;
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw Error(ErrorCode::InvalidArgument, "template task must be pad|smad");
    t.task = *task;
    t.instruction_text = j.at("instruction_text").get<std::string>();
    t.question_text = j.at("question_text").get<std::string>();
    t.example_frame_format = j.at("example_frame_format").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("template JSON: ") + e.what());
  }
  t.validate();
  return t;
}

std::string serialize_template(const PromptTemplate& t) {
  ordered_json j;
  j["task"] = to_string(t.task);
  j["instruction_text"] = t.instruction_text;
  j["question_text"] = t.question_text;
  j["example_frame_format"] = t.example_frame_format;
  return j.dump(2) + "\n";
}

PromptObject assemble_prompt(const DemonstrationSet& demoset, const std::string& query_sample_id,
                             const std::string& query_image, const PromptTemplate& tmpl) {
  if (tmpl.task != demoset.task) {
    throw Error(ErrorCode::TemplateMismatch,
                std::string("template is for ") + std::string(to_string(tmpl.task)) +
                    ", demonstration set for " + std::string(to_string(demoset.task)));
  }
  tmpl.validate();
  const auto frame = split_format(tmpl.example_frame_format);

  PromptObject p;
  p.task = tmpl.task;
  p.query_sample_id = query_sample_id;
  p.demoset_fingerprint = demoset_fingerprint(demoset);

  Message query{Role::User, {}};
  if (demoset.entries.empty()) {
    push_text(query.parts, tmpl.instruction_text);
  } else {
    Message instruction{Role::User, {}};
    push_text(instruction.parts, tmpl.instruction_text);
    p.messages.push_back(std::move(instruction));
    for (const auto& e : demoset.entries) {
      Message shown{Role::User, {}};
      push_text(shown.parts, frame.lead);
      shown.parts.emplace_back(ImagePart{e.path});
      push_text(shown.parts, frame.cue);
      Message answer{Role::Assistant, {}};
      answer.parts.emplace_back(
          TextPart{frame.tail.empty() ? e.reference_answer : e.reference_answer + " " + frame.tail});
      p.messages.push_back(std::move(shown));
      p.messages.push_back(std::move(answer));
    }
  }
  query.parts.emplace_back(ImagePart{query_image});
  push_text(query.parts, tmpl.question_text);
  p.messages.push_back(std::move(query));
  return p;
}

std::string serialize_prompt(const PromptObject& prompt) {
  ordered_json j;
  j["task"] = to_string(prompt.task);
  j["query_sample_id"] = prompt.query_sample_id;
  j["demoset_fingerprint"] = prompt.demoset_fingerprint;
  j["messages"] = ordered_json::array();
  for (const auto& m : prompt.messages) {
    ordered_json parts = ordered_json::array();
    for (const auto& part : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        parts.push_back(ordered_json{{"type", "text"}, {"text", t->text}});
      } else {
        parts.push_back(ordered_json{{"type", "image"}, {"path", std::get<ImagePart>(part).path}});
      }
    }
    j["messages"].push_back(ordered_json{{"role", to_string(m.role)}, {"parts", std::move(parts)}});
  }
  return j.dump(2) + "\n";
}

ordered_json wire_messages(const PromptObject& prompt, const std::filesystem::path& data_root) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : prompt.messages) {
    ordered_json parts = ordered_json::array();
    for (const auto& part : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        parts.push_back(ordered_json{{"type", "text"}, {"text", t->text}});
        continue;
      }
      const auto& rel = std::get<ImagePart>(part).path;
      std::string bytes;
      try {
        bytes = read_file(data_root / rel);
      } catch (const Error&) {
        throw Error(ErrorCode::MissingImage, (data_root / rel).string());
      }
      parts.push_back(ordered_json{
          {"type", "image"}, {"encoding", "base64-png"}, {"data", base64_encode(bytes)}});
    }
    messages.push_back(ordered_json{{"role", to_string(m.role)}, {"parts", std::move(parts)}});
  }
  return messages;
}

}  // namespace icleval
