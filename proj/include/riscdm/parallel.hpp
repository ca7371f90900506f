// SPDX-License-Identifier: Apache-2.0
//
// riscdm: conditional diffusion channel generation for double-RIS links
// Copyright (C) 2026 The riscdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "riscdm/common.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace riscdm {

/// Worker count used when the caller passes 0.
inline Index default_threads()
{
    return std::max<Index>(1, Index(std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Items are
/// handed out in order; callers make each item's result a pure function of i,
/// so the outcome never depends on the worker count.
template <typename Body>
void parallel_for(Index count, Index threads, Body &&body)
{
    if (threads <= 0)
        threads = default_threads();
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (Index i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::mutex lock;
    Index next = 0;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            Index i;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next >= count || failure)
                    return;
                i = next++;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (Index t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace riscdm
