#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace calib {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Work items must be independent; results
// must be written to per-index slots so the outcome does not depend on the
// thread count. If any call throws, the exception from the lowest index is
// rethrown after all workers finish.
inline void parallel_for_indexed(std::size_t count, int threads,
                                 const std::function<void(std::size_t)>& fn) {
    const int nthreads = resolve_threads(threads);
    if (count == 0) return;
    if (nthreads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(nthreads, count);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < count; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
}

}  // namespace calib
