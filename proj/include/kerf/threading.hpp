#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace kerf {

// Worker cap: KERF_THREADS if set (minimum 1), hardware concurrency otherwise.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("KERF_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Run f(i) for i in [0, n) on up to thread_budget() workers.  Work is split
// into contiguous index blocks, so results written to slot i never race and
// every outcome is identical to the serial loop.  The first exception thrown
// by any worker is rethrown here after all workers join.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned budget = thread_budget();
    if (n == 0) return;
    if (budget <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(budget, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace kerf
