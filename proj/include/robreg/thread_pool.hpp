#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace robreg {

// Runs fn(0..n-1) across up to n_threads workers. Tasks own disjoint output
// slots indexed by i, so scheduling order never affects results; the caller
// aggregates sequentially afterwards. The first exception (lowest index) is
// rethrown after all workers join.
inline void parallel_for_indexed(long n, int n_threads, const std::function<void(long)>& fn) {
    if (n <= 0) {
        return;
    }
    if (n_threads <= 1 || n == 1) {
        for (long i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const int workers = static_cast<int>(std::min<long>(n_threads, n));
    std::atomic<long> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
}

} // namespace robreg
