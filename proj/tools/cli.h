// Copyright 2026 The nsqm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSQM_TOOLS_CLI_H
#define NSQM_TOOLS_CLI_H

#include <ostream>

namespace nsqm::cli {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitCheckFailed = 3;
constexpr int kExitIo = 4;

/// Entry point of the `reduce` tool. Writes summary.json, config.ini and the
/// experiment's CSV files into --out and returns one of the exit codes above.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace nsqm::cli

#endif
