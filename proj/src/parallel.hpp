#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ixrisk {

// Static chunked parallel loop. Each index writes only its own output slot,
// so results are identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += n_threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace ixrisk
