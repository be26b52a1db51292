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

#include <iosfwd>
#include <string>
#include <vector>

#include "icleval/common.hpp"

namespace icleval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitPartial = 3;

/// Fatal (1) for I/O and backend failures, invalid input (2) otherwise.
int exit_code_for(ErrorCode code);

/// Entry point behind the icleval executable. args excludes the program
/// name. Results go to out; diagnostics and logs go to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icleval::cli
