// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vidscout {

/// Runs fn(i) for i in [0, n) on at most `workers` threads. The first
/// exception escaping fn is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (count <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace vidscout
