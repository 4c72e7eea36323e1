#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace xqc {

inline int default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(i) for i in [begin, end) on `workers` threads. Work is handed out in
// fixed-size blocks; every fn(i) must write only to slots owned by index i, so
// results do not depend on the thread count.
inline void parallel_for(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t)>& fn,
                         int workers = 0) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    if (workers <= 0) workers = default_workers();
    if (workers == 1 || n < 128) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::int64_t block = std::max<std::int64_t>(64, n / (8 * workers));
    std::atomic<std::int64_t> next(begin);
    auto worker = [&]() {
        for (;;) {
            std::int64_t lo = next.fetch_add(block);
            if (lo >= end) break;
            std::int64_t hi = std::min(lo + block, end);
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace xqc
