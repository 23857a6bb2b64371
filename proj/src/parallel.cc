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

#include "nsqm/parallel.h"

namespace nsqm {

Rng substream(uint64_t seed, uint64_t stream, uint64_t index) {
    std::seed_seq seq{
        (uint32_t)seed,
        (uint32_t)(seed >> 32),
        (uint32_t)stream,
        (uint32_t)(stream >> 32),
        (uint32_t)index,
        (uint32_t)(index >> 32),
    };
    return Rng(seq);
}

int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : (int)hw;
}

}  // namespace nsqm
