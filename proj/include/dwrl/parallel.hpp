#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace dwrl {

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so results
// are identical for any thread count; reductions happen at the call site in
// index order.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t w = 0; w < nthreads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += nthreads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dwrl
