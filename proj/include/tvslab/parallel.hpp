#pragma once

// Task pool for embarrassingly parallel Monte Carlo loops.  Workers pull task
// indices from a shared counter and write results into caller-owned
// task-indexed slots; the caller reduces sequentially in task order
// afterwards, so the aggregate is identical for every thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tvslab {

// Thread budget: TVSLAB_THREADS when set, hardware concurrency otherwise,
// never below 1.
inline int thread_budget() {
    if (const char* env = std::getenv("TVSLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? int(hc) : 1;
}

// Runs fn(task) for task in [0, count) on up to `threads` workers.  The first
// exception thrown by any task is rethrown after all workers stop.
template <class F>
void run_tasks(std::size_t count, int threads, F&& fn) {
    if (count == 0) return;
    const int workers = int(std::min<std::size_t>(std::size_t(std::max(threads, 1)), count));
    if (workers == 1) {
        for (std::size_t t = 0; t < count; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= count || failed.load()) return;
            try {
                fn(t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace tvslab
