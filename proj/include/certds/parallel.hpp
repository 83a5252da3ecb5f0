#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace certds::detail {

/// Calls fn(begin, end) on contiguous chunks of [0, n). Chunk boundaries depend only on
/// n and chunk_size, so per-item results do not depend on the worker count.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int workers, Fn&& fn) {
    if (n == 0) return;
    chunk_size = std::max<std::size_t>(chunk_size, 1);
    const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
    auto run = [&](std::size_t c) { fn(c * chunk_size, std::min(n, (c + 1) * chunk_size)); };
    if (workers <= 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), chunks);
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < chunks; c += w) run(c);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace certds::detail
