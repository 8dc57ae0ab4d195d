#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace semsplat {

// 0 means "use all logical cores".
inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static contiguous partition of [0, count) across num_threads workers.
// fn(begin, end) must write only to locations owned by its range.
template <typename Fn>
void parallel_for(int num_threads, std::size_t count, Fn&& fn) {
    num_threads = resolve_thread_count(num_threads);
    if (count == 0) return;
    if (num_threads <= 1 || count == 1) {
        fn(std::size_t{0}, count);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(num_threads, count);
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(begin + chunk, count);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace semsplat
