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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icleval {

// Hashing. None of these depend on std::hash, so values are stable across
// standard library implementations and can be persisted.
std::string sha256_hex(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
/// Order-sensitive combination of two 64-bit keys.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);
/// Uniform double in [0, 1) from the top 53 bits of a 64-bit key.
double unit_interval(std::uint64_t key);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);
/// Fixed-point formatting, locale independent.
std::string format_fixed(double v, int decimals);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never observe a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Minimal RFC 4180 CSV.
std::string csv_escape(std::string_view field);
std::string csv_join(std::span<const std::string> fields);
/// Splits one CSV record. Quoted fields may contain commas and doubled quotes
/// but not newlines.
std::vector<std::string> csv_split(std::string_view line);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

}  // namespace icleval
