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

#ifndef NSQM_ACCEPTANCE_H
#define NSQM_ACCEPTANCE_H

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nsqm {

enum class CheckKind {
    Within,   // |measured - expected| <= tolerance
    AtMost,   // measured <= expected
    AtLeast,  // measured > expected
};

struct Check {
    std::string name;
    double measured = 0;
    double expected = 0;
    double tolerance = 0;
    CheckKind kind = CheckKind::Within;
    bool pass = false;
};

Check within(std::string name, double measured, double expected, double tolerance);
Check at_most(std::string name, double measured, double bound);
Check at_least(std::string name, double measured, double bound);

/// "name=measured (expected ...)"
std::string describe(const Check &check);

struct CriterionResult {
    int id = 0;
    std::string name;
    std::vector<Check> checks;
    double seconds = 0;

    bool pass() const;
    /// "PASS  3 product_decay  slope=-1.98 (expected -1 +- 0.05)  ..."
    std::string line() const;
};

struct AcceptanceOptions {
    uint64_t seed = 1;
    int threads = 0;
    std::vector<int> only;  // empty runs all twelve
    // Negative control: drift sign used by the product-decay run.
    double product_decay_drift_sign = 1;
    std::function<void(const CriterionResult &)> on_result;
};

std::vector<CriterionResult> check_suite(const AcceptanceOptions &options);

}  // namespace nsqm

#endif
