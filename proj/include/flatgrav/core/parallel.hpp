#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace flatgrav {

/// Worker count: FLATGRAV_THREADS if set and positive, else all cores.
inline unsigned thread_count() {
    if (const char* env = std::getenv("FLATGRAV_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(chunk) for chunk in [0, chunks). Chunks are fixed by the
/// caller, so per-chunk results do not depend on the thread count.
template <class Body>
void parallel_chunks(int chunks, Body&& body) {
    const unsigned workers = std::min<unsigned>(thread_count(), static_cast<unsigned>(chunks));
    if (workers <= 1) {
        for (int c = 0; c < chunks; ++c) body(c);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int c = static_cast<int>(w); c < chunks; c += static_cast<int>(workers)) body(c);
        });
    }
    for (auto& t : pool) t.join();
}

/// Half-open index range of chunk c when n items are split into `chunks`.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, int chunks, int c) {
    const std::size_t lo = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks);
    const std::size_t hi = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(chunks);
    return {lo, hi};
}

}  // namespace flatgrav
