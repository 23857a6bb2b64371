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

#ifndef NSQM_PARALLEL_H
#define NSQM_PARALLEL_H

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace nsqm {

using Rng = std::mt19937_64;

/// Independent generator for item `index` of stream `stream` under `seed`.
/// The result depends only on the three keys, never on scheduling.
Rng substream(uint64_t seed, uint64_t stream, uint64_t index);

/// Maps 0 (auto) to the hardware concurrency, clamps to at least 1.
int resolve_threads(int requested);

/// Calls body(i) for i in [0, n) over `threads` workers. Work is handed out
/// in fixed-size blocks, so callers that write results into slot i and reduce
/// in index order get output independent of the thread count.
template <typename Body>
void parallel_for(size_t n, int threads, Body &&body) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; i++) {
            body(i);
        }
        return;
    }
    constexpr size_t kBlock = 64;
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        while (true) {
            size_t start = next.fetch_add(kBlock);
            if (start >= n) {
                return;
            }
            size_t end = std::min(n, start + kBlock);
            try {
                for (size_t i = start; i < end; i++) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    size_t count = std::min<size_t>(threads, (n + kBlock - 1) / kBlock);
    for (size_t t = 0; t < count; t++) {
        pool.emplace_back(worker);
    }
    for (auto &t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace nsqm

#endif
