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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "icleval/prompt.hpp"
#include "icleval/util.hpp"
#include "test_support.hpp"

namespace icleval {
namespace {

DemonstrationSet two_category_demoset(int n) {
  const auto m = testing::small_manifest("fx", Task::PAD, {{"bona_fide", {5, 1}}, {"print", {5, 1}}});
  DemosetRequest r;
  r.categories = {CategoryId(Task::PAD, "bona_fide"), CategoryId(Task::PAD, "print")};
  r.n_shots = n;
  r.seed = 3;
  r.instruction = PromptTemplate::defaults(Task::PAD).instruction_text;
  return build_demoset(m, r);
}

std::size_t image_parts(const Message& m) {
  std::size_t n = 0;
  for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p);
  return n;
}

TEST(Prompt, ZeroShotIsOneUserTurn) {
  const auto p = assemble_prompt(two_category_demoset(0), "q1", "img/q1.png", PromptTemplate::defaults(Task::PAD));
  ASSERT_EQ(p.messages.size(), 1u);
  EXPECT_EQ(p.messages[0].role, Role::User);
  ASSERT_EQ(p.messages[0].parts.size(), 3u);
  EXPECT_EQ(std::get<ImagePart>(p.messages[0].parts[1]).path, "img/q1.png");
  EXPECT_EQ(p.query_sample_id, "q1");
}

TEST(Prompt, OneShotTwoCategoriesLayout) {
  const auto ds = two_category_demoset(1);
  const auto p = assemble_prompt(ds, "q1", "img/q1.png", PromptTemplate::defaults(Task::PAD));
  // instruction, 2 x (example, answer), query
  ASSERT_EQ(p.messages.size(), 6u);
  EXPECT_EQ(p.messages[0].role, Role::User);
  EXPECT_EQ(image_parts(p.messages[0]), 0u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& shown = p.messages[1 + 2 * i];
    const auto& answer = p.messages[2 + 2 * i];
    EXPECT_EQ(shown.role, Role::User);
    EXPECT_EQ(image_parts(shown), 1u);
    EXPECT_EQ(answer.role, Role::Assistant);
    EXPECT_EQ(std::get<TextPart>(answer.parts.at(0)).text, ds.entries[i].reference_answer);
  }
  EXPECT_EQ(std::get<TextPart>(p.messages[2].parts[0]).text, "Yes");
  EXPECT_EQ(std::get<TextPart>(p.messages[4].parts[0]).text, "No");
  EXPECT_EQ(image_parts(p.messages[5]), 1u);
  EXPECT_EQ(p.demoset_fingerprint, demoset_fingerprint(ds));
}

TEST(Prompt, Deterministic) {
  const auto t = PromptTemplate::defaults(Task::PAD);
  EXPECT_EQ(serialize_prompt(assemble_prompt(two_category_demoset(3), "q", "img/q.png", t)),
            serialize_prompt(assemble_prompt(two_category_demoset(3), "q", "img/q.png", t)));
}

TEST(Prompt, GoldenTwoShot) {
  const auto text =
      serialize_prompt(assemble_prompt(two_category_demoset(2), "fx_te_print_0", "img/fx_te_print_0.png",
                                       PromptTemplate::defaults(Task::PAD)));
  EXPECT_TRUE(testing::matches_golden("prompt_pad_2shot.json", text)) << text;
}

TEST(Prompt, TemplateMismatch) {
  try {
    assemble_prompt(two_category_demoset(1), "q", "img/q.png", PromptTemplate::defaults(Task::SMAD));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TemplateMismatch);
  }
}

TEST(Prompt, CueAndTailPlacement) {
  auto t = PromptTemplate::defaults(Task::PAD);
  t.example_frame_format = "Example: {image} Is it live? {answer}.";
  const auto p = assemble_prompt(two_category_demoset(1), "q", "img/q.png", t);
  const auto& shown = p.messages[1].parts;
  ASSERT_EQ(shown.size(), 3u);
  EXPECT_EQ(std::get<TextPart>(shown[0]).text, "Example:");
  EXPECT_EQ(std::get<TextPart>(shown[2]).text, "Is it live?");
  EXPECT_EQ(std::get<TextPart>(p.messages[2].parts[0]).text, "Yes .");
}

TEST(PromptTemplate, Validate) {
  auto t = PromptTemplate::defaults(Task::SMAD);
  EXPECT_NO_THROW(t.validate());
  t.example_frame_format = "{answer} {image}";
  EXPECT_THROW(t.validate(), Error);
  t.example_frame_format = "{image} {image} {answer}";
  EXPECT_THROW(t.validate(), Error);
  t = PromptTemplate::defaults(Task::SMAD);
  t.question_text = "Describe the picture.";
  EXPECT_THROW(t.validate(), Error);
}

TEST(PromptTemplate, JsonRoundTrip) {
  const auto t = PromptTemplate::defaults(Task::SMAD);
  const auto back = parse_template(serialize_template(t));
  EXPECT_EQ(back.task, t.task);
  EXPECT_EQ(back.instruction_text, t.instruction_text);
  EXPECT_EQ(back.question_text, t.question_text);
  EXPECT_EQ(back.example_frame_format, t.example_frame_format);
  EXPECT_THROW(parse_template("{\"task\": \"pad\"}"), Error);
}

TEST(WireMessages, InlinesBase64AndReportsMissingImages) {
  testing::TempDir dir;
  write_file_atomic(dir.path() / "img/q.png", std::string("\x89PNG", 4));
  const auto p = assemble_prompt(two_category_demoset(0), "q", "img/q.png", PromptTemplate::defaults(Task::PAD));
  const auto wire = wire_messages(p, dir.path());
  ASSERT_EQ(wire.size(), 1u);
  const auto& img = wire[0]["parts"][1];
  EXPECT_EQ(img["type"], "image");
  EXPECT_EQ(img["encoding"], "base64-png");
  EXPECT_EQ(img["data"], "iVBORw==");

  const auto p1 = assemble_prompt(two_category_demoset(1), "q", "img/q.png", PromptTemplate::defaults(Task::PAD));
  try {
    wire_messages(p1, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingImage);
  }
}

}  // namespace
}  // namespace icleval
