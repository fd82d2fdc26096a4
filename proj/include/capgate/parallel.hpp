#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace capgate {

// Worker count from CAPGATE_THREADS, else hardware concurrency (at least 1).
unsigned default_threads() noexcept;

// Calls fn(i) for every i in [0, count) on up to `threads` workers. Work is
// claimed dynamically, so fn must write only to slot i of its outputs. The
// first exception thrown by any call is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (count == 0) return;
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
        body();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace capgate
