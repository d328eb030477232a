#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ebal {

// Runs fn(0..count-1) across up to `jobs` threads. Callers keep determinism
// by writing only to their own slot; the first exception is rethrown after
// all threads join.
inline void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    if (jobs < 1) jobs = 1;
    jobs = std::min(jobs, count);
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err = nullptr;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace ebal
