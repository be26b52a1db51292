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

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icleval/common.hpp"
#include "icleval/demoset.hpp"

namespace icleval {

struct PromptTemplate {
  Task task = Task::PAD;
  std::string instruction_text;
  std::string question_text;
  /// Shape of one demonstration. "{image}" marks the image, "{answer}" the
  /// reference answer; text between them is the cue shown with the image.
  std::string example_frame_format;

  /// Built-in wording. Not known to match any published experiment.
  static PromptTemplate defaults(Task task);
  /// Throws InvalidArgument when placeholders are missing, repeated, out of
  /// order, or the question does not ask for Yes/No.
  void validate() const;
};

PromptTemplate parse_template(const std::string& json_text);
std::string serialize_template(const PromptTemplate& t);

struct TextPart {
  std::string text;
  friend bool operator==(const TextPart&, const TextPart&) = default;
};
/// Image referenced by manifest path; bytes are only loaded for the wire.
struct ImagePart {
  std::string path;
  friend bool operator==(const ImagePart&, const ImagePart&) = default;
};
using Part = std::variant<TextPart, ImagePart>;

enum class Role { User, Assistant };

struct Message {
  Role role = Role::User;
  std::vector<Part> parts;
  friend bool operator==(const Message&, const Message&) = default;
};

struct PromptObject {
  Task task = Task::PAD;
  std::vector<Message> messages;
  std::string query_sample_id;
  std::string demoset_fingerprint;

  friend bool operator==(const PromptObject&, const PromptObject&) = default;
};

/// [user: instruction], then per entry [user: image + cue][assistant: answer],
/// then [user: query image + question]. Without entries the instruction,
/// query image and question share one user turn.
PromptObject assemble_prompt(const DemonstrationSet& demoset, const std::string& query_sample_id,
                             const std::string& query_image, const PromptTemplate& tmpl);

/// Path-referencing JSON used for golden fixtures; byte-deterministic.
std::string serialize_prompt(const PromptObject& prompt);

/// Wire-protocol "messages" array with images inlined as base64. Paths are
/// resolved against data_root. Throws MissingImage.
nlohmann::ordered_json wire_messages(const PromptObject& prompt, const std::filesystem::path& data_root);

std::string_view to_string(Role r);

}  // namespace icleval
