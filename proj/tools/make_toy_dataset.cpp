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

// Writes the bundled synthetic dataset: 40 flat-colour PNG "faces" in two
// categories, a manifest and a known-attack plan file. Every image has
// distinct bytes so hash-keyed backends can tell them apart.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <zlib.h>

#include "icleval/manifest.hpp"
#include "icleval/protocol.hpp"
#include "icleval/util.hpp"

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void chunk(std::string& png, const char* type, const std::string& data) {
  put_u32(png, static_cast<std::uint32_t>(data.size()));
  const std::string body = std::string(type, 4) + data;
  png += body;
  put_u32(png, static_cast<std::uint32_t>(
                   crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

std::string encode_png(int w, int h, const std::vector<std::uint8_t>& rgb) {
  std::string raw;
  for (int y = 0; y < h; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(rgb.data()) + static_cast<std::size_t>(y) * w * 3,
               static_cast<std::size_t>(w) * 3);
  }
  uLongf size = compressBound(static_cast<uLong>(raw.size()));
  std::string z(size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &size, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("zlib compression failed");
  }
  z.resize(size);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", "");
  return png;
}

// A light oval on a tinted background; attacks get a moire stripe pattern.
std::string face_image(int index, bool attack) {
  constexpr int kSize = 32;
  std::vector<std::uint8_t> px(kSize * kSize * 3);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      const double dx = (x - 15.5) / 10.0;
      const double dy = (y - 15.5) / 13.0;
      const bool face = dx * dx + dy * dy < 1.0;
      std::uint8_t r = face ? 224 : static_cast<std::uint8_t>(40 + 5 * index);
      std::uint8_t gch = face ? 188 : static_cast<std::uint8_t>(90 + 3 * index);
      std::uint8_t b = face ? 160 : 120;
      if (attack && (x + y) % 4 < 2) {
        r = static_cast<std::uint8_t>(r / 2);
        gch = static_cast<std::uint8_t>(gch / 2);
      }
      auto* p = &px[static_cast<std::size_t>(y * kSize + x) * 3];
      p[0] = r;
      p[1] = gch;
      p[2] = b;
    }
  }
  return encode_png(kSize, kSize, px);
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path root = argc > 1 ? argv[1] : "data/toy";
  using namespace icleval;

  std::vector<SampleRecord> records;
  for (int label = 0; label < 2; ++label) {
    const bool attack = label == 1;
    const std::string category = attack ? "print_attack" : std::string(kBonaFide);
    for (int i = 0; i < 20; ++i) {
      const std::string id = (attack ? "atk_" : "bf_") + std::string(i < 10 ? "0" : "") + std::to_string(i);
      const std::string rel = "images/" + id + ".png";
      write_file_atomic(root / rel, face_image(i, attack));
      SampleRecord r;
      r.sample_id = id;
      r.dataset = "toy";
      r.split = i < 6 ? Split::Train : Split::Test;
      r.media = ImageMedia{rel};
      r.label = attack ? Label::Attack : Label::BonaFide;
      r.category = CategoryId(Task::PAD, category);
      r.subject_id = "s" + std::to_string(i % 10);
      r.cropped = true;
      records.push_back(std::move(r));
    }
  }
  const DatasetManifest manifest("toy", Task::PAD, records);
  write_file_atomic(root / "manifest.jsonl", serialize_manifest(manifest));

  EnumerateOptions opts;
  opts.shots = {0, 1, 3};
  const auto plans = enumerate_plans({manifest}, Task::PAD, Scenario::KnownAttack, opts);
  write_file_atomic(root / "plans.json", serialize_plans(plans));
  std::cout << "wrote " << records.size() << " samples and " << plans.size() << " plan(s) to " << root.string()
            << "\n";
  return 0;
}
